import { describe, expect, it } from "vitest";

import { LatestWins } from "../src/latest.js";

interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (err: unknown) => void;
}

function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (err: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

describe("latest-wins scheduling", () => {
  it("resolves an uncontested request with its value", async () => {
    const latest = new LatestWins();
    const value = await latest.run("panel", async () => 42);
    expect(value).toBe(42);
  });

  it("drops a stale result when a newer request lands first", async () => {
    const latest = new LatestWins();
    const slow = deferred<string>();
    const slowRun = latest.run("panel", () => slow.promise);
    const fast = await latest.run("panel", async () => "fresh");
    expect(fast).toBe("fresh");
    slow.resolve("stale");
    expect(await slowRun).toBeNull();
  });

  it("aborts the previous request's signal", async () => {
    const latest = new LatestWins();
    let firstSignal: AbortSignal | null = null;
    const first = deferred<number>();
    const run1 = latest.run("panel", (signal) => {
      firstSignal = signal;
      return first.promise;
    });
    expect(firstSignal!.aborted).toBe(false);
    const run2 = latest.run("panel", async () => 2);
    expect(firstSignal!.aborted).toBe(true);
    first.resolve(1);
    expect(await run1).toBeNull();
    expect(await run2).toBe(2);
  });

  it("keeps panels independent", async () => {
    const latest = new LatestWins();
    const a = deferred<string>();
    const runA = latest.run("a", () => a.promise);
    const runB = latest.run("b", async () => "b-value");
    expect(await runB).toBe("b-value");
    a.resolve("a-value");
    expect(await runA).toBe("a-value");
  });

  it("propagates an error only from the latest request", async () => {
    const latest = new LatestWins();
    const slow = deferred<number>();
    const run1 = latest.run("panel", () => slow.promise);
    const run2 = latest.run("panel", async () => {
      throw new Error("boom");
    });
    slow.reject(new Error("stale failure"));
    expect(await run1).toBeNull();
    await expect(run2).rejects.toThrow("boom");
  });

  it("swallows failures caused by its own abort", async () => {
    const latest = new LatestWins();
    const run1 = latest.run("panel", (signal) => {
      return new Promise<number>((_, reject) => {
        signal.addEventListener("abort", () => reject(new Error("aborted")));
      });
    });
    const run2 = latest.run("panel", async () => 7);
    expect(await run1).toBeNull();
    expect(await run2).toBe(7);
  });

  it("reports whether a panel has a request in flight", async () => {
    const latest = new LatestWins();
    expect(latest.busy("panel")).toBe(false);
    const gate = deferred<number>();
    const run = latest.run("panel", () => gate.promise);
    expect(latest.busy("panel")).toBe(true);
    gate.resolve(1);
    await run;
    expect(latest.busy("panel")).toBe(false);
  });
});
