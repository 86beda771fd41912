/** Latest-wins request scheduling, one slot per panel.
 *
 * Dragging the orbit slider or clicking through views fires requests
 * faster than the service renders them. Each panel keeps at most one
 * request in flight; starting a new one aborts the previous, and a
 * result is applied only if it is still the newest request for its
 * panel, so a slow stale response can never overwrite a fresh one.
 */

export type Starter<T> = (signal: AbortSignal) => Promise<T>;

interface Slot {
  seq: number;
  controller: AbortController | null;
}

export class LatestWins {
  private slots = new Map<string, Slot>();

  /**
   * Start `fn` in the panel's slot. Resolves with the result if it is
   * still the latest request, or null if it was superseded or aborted.
   */
  async run<T>(panel: string, fn: Starter<T>): Promise<T | null> {
    let slot = this.slots.get(panel);
    if (slot === undefined) {
      slot = { seq: 0, controller: null };
      this.slots.set(panel, slot);
    }
    slot.controller?.abort();
    const controller = new AbortController();
    slot.controller = controller;
    const seq = ++slot.seq;
    try {
      const value = await fn(controller.signal);
      return slot.seq === seq ? value : null;
    } catch (err) {
      if (slot.seq !== seq || controller.signal.aborted) return null;
      throw err;
    } finally {
      if (slot.seq === seq) slot.controller = null;
    }
  }

  /** True while the panel's newest request has not settled. */
  busy(panel: string): boolean {
    const slot = this.slots.get(panel);
    return slot !== undefined && slot.controller !== null;
  }
}
