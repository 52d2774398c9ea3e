"""Embedded explicit Runge-Kutta stepping for autonomous systems.

Dormand-Prince 5(4): seven stages, 5th order propagation with an embedded
4th order solution for the local error estimate. Unlike ``solve_ivp`` the
stepper hands every accepted step back to the caller, which is what level
curve tracing needs (projection onto the level set after each step, custom
closure detection).
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class StepResult:
    y: np.ndarray
    h: float
    h_next: float
    rejected: int


class DormandPrince:

    #intermediate evaluation times
    C = (0.0, 1/5, 3/10, 4/5, 8/9, 1.0, 1.0)

    #butcher table
    BT = {
        1: [      1/5],
        2: [     3/40,         9/40],
        3: [    44/45,       -56/15,       32/9],
        4: [19372/6561, -25360/2187, 64448/6561, -212/729],
        5: [ 9017/3168,     -355/33, 46732/5247,   49/176, -5103/18656],
        6: [    35/384,           0,   500/1113,  125/192,  -2187/6784, 11/84],
    }

    #5th order weights
    B = (35/384, 0, 500/1113, 125/192, -2187/6784, 11/84, 0)

    #difference to the embedded 4th order weights
    TR = (71/57600, 0, -71/16695, 71/1920, -17253/339200, 22/525, -1/40)

    def __init__(self, rtol=1e-10, atol=1e-12, h_min=1e-14, h_max=np.inf,
                 safety=0.9, max_rejects=60):
        self.rtol = rtol
        self.atol = atol
        self.h_min = h_min
        self.h_max = h_max
        self.safety = safety
        self.max_rejects = max_rejects

    def stages(self, f, y, h):
        k = [np.asarray(f(y), dtype=float)]
        for s in range(1, 7):
            incr = sum(a * ks for a, ks in zip(self.BT[s], k) if a != 0)
            k.append(np.asarray(f(y + h * incr), dtype=float))
        return k

    def step(self, f, y, h):
        """Single trial step; returns the 5th order solution and the error norm."""
        k = self.stages(f, y, h)
        y_new = y + h * sum(b * ks for b, ks in zip(self.B, k) if b != 0)
        err = h * sum(e * ks for e, ks in zip(self.TR, k) if e != 0)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return y_new, float(np.sqrt(np.mean((err / scale) ** 2)))

    def advance(self, f, y, h):
        """Take one accepted step starting with trial size ``h``."""
        rejected = 0
        while True:
            h = float(np.clip(h, self.h_min, self.h_max))
            y_new, err = self.step(f, y, h)
            if np.all(np.isfinite(y_new)) and (err <= 1.0 or h <= self.h_min):
                factor = 5.0 if err == 0 else min(5.0, self.safety * err ** -0.2)
                return StepResult(y_new, h, float(np.clip(h * factor, self.h_min, self.h_max)), rejected)
            rejected += 1
            if rejected > self.max_rejects:
                raise FloatingPointError(f"step size control failed at h={h:.3e}")
            factor = 0.2 if not np.isfinite(err) else max(0.2, self.safety * err ** -0.2)
            h = h * factor


def hermite(y0, f0, y1, f1, h, theta):
    """Cubic Hermite interpolant on a step of length ``h`` at fractions ``theta``."""
    theta = np.asarray(theta, dtype=float)[..., None]
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + theta
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
