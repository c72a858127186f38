#!/usr/bin/env python3
"""Import the compiled extension and exercise the main operations.

Build it first with `cargo build -p kropina-py`, then run this script from
anywhere; it locates the shared library under target/ itself.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def load_module():
    repo = Path(__file__).resolve().parent.parent
    candidates = [
        repo / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libkropina_py.so", "kropina_py.so", "libkropina_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not built; run: cargo build -p kropina-py")
    stage = Path(tempfile.mkdtemp(prefix="kropina-py-"))
    shutil.copy2(built, stage / "kropina_py.so")
    sys.path.insert(0, str(stage))
    import kropina_py

    return kropina_py


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} differs from {b} by more than {tol}"


def main():
    kp = load_module()
    full = kp.Metric.swirl_original()
    slow = kp.Metric.swirl_generalized()

    # The resultant of any admissible heading lies on the unit indicatrix.
    vx, vy = full.heading_velocity(0.0, 0.0, 0.0)
    assert (vx, vy) == (2.0, 0.0), f"downwind start should be (2, 0), got {(vx, vy)}"
    approx(full.value(0.0, 0.0, vx, vy), 1.0, 1e-12)
    for phi in (0.5, 2.0, -1.3):
        wx, wy = slow.heading_velocity(0.3, -0.4, phi)
        approx(slow.value(0.3, -0.4, wx, wy), 1.0, 1e-12)

    # The heading pointing straight against the wind is excluded.
    try:
        full.heading_velocity(0.0, 0.0, math.pi)
    except ValueError:
        pass
    else:
        sys.exit("upwind heading was not rejected")

    # Geodesics keep unit metric speed.
    traj = slow.geodesic(0.0, 0.0, math.pi / 4, 5.0)
    assert traj.stop == "time_limit", traj.stop
    assert len(traj) == 501, len(traj)
    drift = max(abs(f - 1.0) for f in traj.f_value)
    assert drift < 1e-7, f"unit-speed drift {drift:.3e}"

    # A constant wind carries the craft along a straight line.
    const = kp.Metric.constant_wind(0.6, 0.8)
    line = const.geodesic(0.0, 0.0, 0.0, 2.0)
    ex, ey = line.end()
    heading = math.atan2(ey, ex)
    straightness = max(
        abs(x * math.sin(heading) - y * math.cos(heading))
        for x, y in zip(line.x, line.y)
    )
    assert straightness < 1e-9, f"constant-wind path bent by {straightness:.3e}"

    # Shooting recovers the heading that produced a known endpoint.
    target = slow.geodesic(0.0, 0.0, 1.1, 2.0).end()
    phi0, time, miss = slow.shoot(0.0, 0.0, *target, t_end=3.0)
    approx(phi0, 1.1, 1e-6)
    approx(time, 2.0, 1e-6)
    assert miss < 1e-8, f"miss {miss:.3e}"

    # Halving a constant wind strength doubles the travel time.
    half = kp.Metric.swirl_scaled(0.5)
    _, t_full, _ = kp.Metric.swirl_scaled(1.0).shoot(0.0, 0.0, *target, t_end=6.0)
    _, t_half, _ = half.shoot(0.0, 0.0, *target, t_end=6.0)
    approx(t_half / t_full, 2.0, 1e-6)

    print("smoke test passed:", full, slow, const, sep="\n  ")


if __name__ == "__main__":
    main()
