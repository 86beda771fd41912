"""
Interactive segmentation over HTTP: pick, extract, orbit
========================================================

The service wraps a trained checkpoint in a small JSON+PNG API, the same one
the browser viewer uses. This script plays the full interaction as a plain
HTTP client: list views, lasso an object, extract it, and render it from a
novel orbit pose.

Runs its own server on a throwaway port; needs nothing up front.
"""

import json
import subprocess
import sys
import tempfile
import time
import urllib.error
import urllib.request
from pathlib import Path

import numpy as np

from labelsplat import (make_synthetic_scene, make_synthetic_views,
                        save_bundle, save_checkpoint, SceneBundle)

PORT = 7879
BASE = f"http://127.0.0.1:{PORT}"


def get(path):
    with urllib.request.urlopen(BASE + path) as r:
        body = r.read()
        return json.loads(body) if r.headers["content-type"].startswith(
            "application/json") else body


def post(path, payload):
    req = urllib.request.Request(
        BASE + path, data=json.dumps(payload).encode(),
        headers={"content-type": "application/json"})
    with urllib.request.urlopen(req) as r:
        body = r.read()
        return json.loads(body) if r.headers["content-type"].startswith(
            "application/json") else body


# A ground-truth checkpoint stands in for a training run; the service only
# needs a labeled .ply and the bundle it belongs to.
root = Path(tempfile.mkdtemp(prefix="svcdemo"))
gt = make_synthetic_scene(seed=0, n_objects=2)
train, test = make_synthetic_views(gt, n_train=4, n_test=2,
                                   width=96, height=96)
save_bundle(SceneBundle(views=train + test,
                        splits=["train"] * 4 + ["test"] * 2,
                        extra={"background": list(gt.background_color)}),
            root / "bundle")
save_checkpoint(gt, root / "gt.ply")

server = subprocess.Popen(
    [sys.executable, "-m", "labelsplat.cli", "serve",
     str(root / "gt.ply"), str(root / "bundle"), "--port", str(PORT)],
    stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
try:
    for _ in range(60):
        try:
            health = get("/health")
            break
        except (urllib.error.URLError, ConnectionError):
            time.sleep(0.5)
    else:
        raise RuntimeError("service did not come up")
    print("health:", health)

    views = get("/views")["views"]
    print("views:", [v["id"] for v in views])

    # Lasso the whole frame of a held-out view: the pick reports every label
    # under the polygon, largest region first.
    view_id = views[-1]["id"]
    w, h = views[-1]["width"], views[-1]["height"]
    picked = post("/pick", {"view": view_id,
                            "polygon": [[0, 0], [w - 1, 0],
                                        [w - 1, h - 1], [0, h - 1]]})
    print("picked:", picked["labels"])

    # Extract the largest object. The id is deterministic for the label set,
    # so re-extracting after a reload lands on the same session.
    label = picked["labels"][0]["id"]
    session = post("/extract", {"labels": [label]})
    print("extraction:", session)

    png = get(f"/render_extracted?object_id={session['object_id']}"
              f"&view={view_id}")
    print(f"render from {view_id}: {len(png)} bytes of PNG")

    # Orbit: walk the camera around the bundle pose and ask for explicit
    # poses. The service accepts any orthonormal rotation + translation.
    base = views[-1]
    R = np.array(base["rotation"]).reshape(3, 3)
    t = np.array(base["translation"])
    for angle in (0.15, 0.30):
        c, s = np.cos(angle), np.sin(angle)
        spin = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
        frame = post("/render_extracted",
                     {"object_id": session["object_id"],
                      "rotation": list((R @ spin).reshape(-1)),
                      "translation": list(t)})
        print(f"orbit {angle:+.2f} rad: {len(frame)} bytes of PNG")

    # Errors come back as machine-readable JSON, not HTML.
    try:
        get("/render?view=nope")
    except urllib.error.HTTPError as e:
        print("unknown view ->", e.code, json.loads(e.read()))
finally:
    server.terminate()
    server.wait(timeout=10)
print("done")
