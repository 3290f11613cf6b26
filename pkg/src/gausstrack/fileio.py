"""On-disk formats: Gaussian sets, camera lists, track fields, scene dirs.

Text formats round-trip 64-bit floats via 17-significant-digit decimals.
The binary track format is magic ``TRKF`` + little-endian uint32 header
(view id, width, height), float32 targets row-major, then a validity byte
plane.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .core import CameraView, Gaussian3D
from .errors import MalformedFile
from .motion2d import TrackField
from .scene import SceneSequence

_FMT = "%.17g"


def save_gaussians(path, gaussians):
    with open(path, "w") as f:
        f.write(f"GAUSS3D v1 {len(gaussians)}\n")
        for g in gaussians:
            vals = np.concatenate([g.mean, g.rotation, g.scale, [g.opacity]])
            f.write(" ".join(_FMT % v for v in vals) + "\n")


def load_gaussians(path):
    try:
        with open(path) as f:
            header = f.readline().split()
            if len(header) != 3 or header[0] != "GAUSS3D" or header[1] != "v1":
                raise MalformedFile(f"{path}: bad GAUSS3D header")
            count = int(header[2])
            out = []
            for _ in range(count):
                vals = [float(v) for v in f.readline().split()]
                if len(vals) != 11:
                    raise MalformedFile(f"{path}: expected 11 values per line")
                out.append(Gaussian3D(vals[0:3], vals[3:7], vals[7:10], vals[10]))
            return out
    except (ValueError, OSError) as e:
        raise MalformedFile(f"{path}: {e}")


def save_cameras(path, cameras):
    with open(path, "w") as f:
        f.write("CAMERA v1\n")
        for c in cameras:
            vals = list(c.rotation.ravel()) + list(c.translation) + \
                [c.fx, c.fy, c.cx, c.cy, c.width, c.height]
            f.write(" ".join(_FMT % v for v in vals) + "\n")


def load_cameras(path):
    try:
        with open(path) as f:
            header = f.readline().split()
            if header != ["CAMERA", "v1"]:
                raise MalformedFile(f"{path}: bad CAMERA header")
            out = []
            for line in f:
                if not line.strip():
                    continue
                vals = [float(v) for v in line.split()]
                if len(vals) != 18:
                    raise MalformedFile(f"{path}: expected 18 values per camera")
                out.append(CameraView(np.array(vals[:9]).reshape(3, 3),
                                      vals[9:12], vals[12], vals[13], vals[14],
                                      vals[15], int(vals[16]), int(vals[17])))
            return out
    except (ValueError, OSError) as e:
        raise MalformedFile(f"{path}: {e}")


def save_trackfield_text(path, tf: TrackField):
    with open(path, "w") as f:
        f.write(f"TRACKFIELD v1 {tf.view_id} {tf.width} {tf.height}\n")
        flat = tf.target.reshape(-1, 2)
        valid = tf.valid.ravel()
        for i in range(len(flat)):
            f.write(f"{_FMT % flat[i, 0]} {_FMT % flat[i, 1]} "
                    f"{1 if valid[i] else 0}\n")


def load_trackfield_text(path) -> TrackField:
    try:
        with open(path) as f:
            header = f.readline().split()
            if (len(header) != 5 or header[0] != "TRACKFIELD"
                    or header[1] != "v1"):
                raise MalformedFile(f"{path}: bad TRACKFIELD header")
            view_id, width, height = int(header[2]), int(header[3]), int(header[4])
            data = np.loadtxt(f, ndmin=2)
            if data.shape != (width * height, 3):
                raise MalformedFile(f"{path}: expected {width * height} rows")
            target = data[:, :2].reshape(height, width, 2)
            valid = data[:, 2].reshape(height, width) != 0
            return TrackField(view_id, width, height, target, valid)
    except (ValueError, OSError) as e:
        raise MalformedFile(f"{path}: {e}")


TRKF_MAGIC = b"TRKF"


def save_trackfield_binary(path, tf: TrackField):
    with open(path, "wb") as f:
        f.write(TRKF_MAGIC)
        f.write(struct.pack("<III", tf.view_id, tf.width, tf.height))
        f.write(np.ascontiguousarray(tf.target, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(tf.valid, dtype=np.uint8).tobytes())


def load_trackfield_binary(path) -> TrackField:
    try:
        with open(path, "rb") as f:
            if f.read(4) != TRKF_MAGIC:
                raise MalformedFile(f"{path}: bad TRKF magic")
            view_id, width, height = struct.unpack("<III", f.read(12))
            n = width * height
            target = np.frombuffer(f.read(n * 8), dtype="<f4").astype(np.float64)
            if target.size != n * 2:
                raise MalformedFile(f"{path}: truncated target block")
            valid = np.frombuffer(f.read(n), dtype=np.uint8)
            if valid.size != n:
                raise MalformedFile(f"{path}: truncated validity plane")
            return TrackField(view_id, width, height,
                              target.reshape(height, width, 2),
                              valid.reshape(height, width) != 0)
    except (ValueError, OSError, struct.error) as e:
        raise MalformedFile(f"{path}: {e}")


# ---------------------------------------------------------------------------
# scene directories

def frame_filename(frame):
    return f"frame_{frame:04d}.txt"


def track_filename(view, frame):
    return f"track_view{view:03d}_frame{frame:04d}.trk"


def save_scene(dirpath, scene: SceneSequence):
    os.makedirs(dirpath, exist_ok=True)
    save_cameras(os.path.join(dirpath, "cameras.txt"), scene.cameras)
    for t, frame in enumerate(scene.frames):
        save_gaussians(os.path.join(dirpath, frame_filename(t)), frame)


def load_scene(dirpath) -> SceneSequence:
    cameras = load_cameras(os.path.join(dirpath, "cameras.txt"))
    frames = []
    t = 0
    while os.path.exists(os.path.join(dirpath, frame_filename(t))):
        frames.append(load_gaussians(os.path.join(dirpath, frame_filename(t))))
        t += 1
    if not frames:
        raise MalformedFile(f"{dirpath}: no frame files found")
    counts = {len(f) for f in frames}
    if len(counts) != 1:
        raise MalformedFile(f"{dirpath}: frames disagree on Gaussian count")
    return SceneSequence(cameras, frames, None)
