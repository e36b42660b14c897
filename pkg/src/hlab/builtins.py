"""Built-in example problems, generated as problem-file text."""
from __future__ import annotations

from .problem import ProblemError, ProblemFile

EX1 = """\
[sode]
dim = 2
g1 = (y1^2 + y2^2) / 2
g2 = 2*y1*y2
homog2 = true

[theta]
theta1 = 2*y1
theta2 = y2

[sigma]
sigma1 = -2*y1^2 - 2*y2^2
sigma2 = -4*y1*y2

[lagrangian]
L = (2*y1^2 + y2^2) / 2

[dissipation]
D = -2/3*y1^3 - 2*y1*y2^2

[domain]
count = 200
seed = 0

[check]
ids = LGH, D1, D2, D3, LIE_CLOSED, LAGRANGE, ENERGY
tol = 1e-8

[solve]
set = D1
deg_y = 1
deg_x = 0

[trajectory]
x0 = 0, 0
y0 = 1, 2
h = 1e-3
steps = 100
"""

GYRO_CLASS = """\
# d2x/dt2 + 2 N(x) dx/dt + V(x) = 0 with g = diag(2, 1): g N is skew, g dV/dx symmetric.
[gyro]
g = 2, 0; 0, 1
n12 = x2
n21 = -2*x2
v1 = x1/2
v2 = x2

[lagrangian]
L = (2*y1^2 + y2^2)/2 - (x1^2 + x2^2)/2

[domain]
count = 200
seed = 0

[check]
ids = GNV, G1, G2, LGH, LAGRANGE, ENERGY, ENERGY_DRIFT
tol = 1e-8

[trajectory]
x0 = 0.3, -0.2
y0 = 0.5, 0.4
h = 1e-3
steps = 2000
"""

CLASSIC_GYRO = """\
# d2x/dt2 = A dx/dt + B x with A = [[0, 1], [-1, 0]], B = [[-1, 0.5], [0.5, -2]].
[gyro]
g = 1, 0; 0, 1
n12 = -0.5
n21 = 0.5
v1 = x1 - 0.5*x2
v2 = -0.5*x1 + 2*x2

[lagrangian]
L = (y1^2 + y2^2)/2 - (x1^2/2 - x1*x2/2 + x2^2)

[domain]
count = 200
seed = 0

[check]
ids = GNV, G1, G2, LGH, LAGRANGE, ENERGY, ENERGY_DRIFT
tol = 1e-8

[trajectory]
x0 = 0.5, -0.5
y0 = 0.2, 0.3
h = 1e-3
steps = 2000
"""

FINSLER_GYRO = """\
# G^i = -|y| omega_ij y^j / 2 with constant omega_12 = 1, F = |y|, theta = d_J F.
[sode]
dim = 2
g1 = -sqrt(y1^2 + y2^2) * y2 / 2
g2 = sqrt(y1^2 + y2^2) * y1 / 2
homog2 = true

[theta]
theta1 = y1 / sqrt(y1^2 + y2^2)
theta2 = y2 / sqrt(y1^2 + y2^2)

[sigma]
sigma1 = y2
sigma2 = -y1

[lagrangian]
L = sqrt(y1^2 + y2^2)

[omega]
w1_2 = 1

[domain]
count = 200
seed = 0

[check]
ids = HOMOG2, ONE_HOMOG, ONE_HOMOG_GYRO, LAGRANGE
tol = 1e-8
"""


def projective(lam: float = 1.0, dim: int = 2) -> str:
    """G^i = lam F y^i with Euclidean F; theta = d_J F^2, D = -(4/3) lam F^3, p = 2."""
    if dim < 1:
        raise ProblemError("dim must be >= 1")
    lam = float(lam)
    F = "sqrt(" + " + ".join(f"y{i}^2" for i in range(1, dim + 1)) + ")"
    lines = ["[sode]", f"dim = {dim}"]
    lines += [f"g{i} = {lam!r} * {F} * y{i}" for i in range(1, dim + 1)]
    lines += ["homog2 = true", "", "[theta]"]
    lines += [f"theta{i} = 2*y{i}" for i in range(1, dim + 1)]
    if lam == 0.0:
        lines += ["", "[lagrangian]", "L = " + " + ".join(f"y{i}^2" for i in range(1, dim + 1)),
                  "", "[check]", "ids = HOMOG2, FM, H, LAGRANGE", "tol = 1e-8"]
    else:
        lines += ["", "[sigma]"]
        lines += [f"sigma{i} = {-4 * lam!r} * {F} * y{i}" for i in range(1, dim + 1)]
        lines += ["", "[lagrangian]", "L = " + " + ".join(f"y{i}^2" for i in range(1, dim + 1)),
                  "", "[dissipation]", f"D = {-4 * lam / 3!r} * {F}^3",
                  "", "[check]",
                  "ids = HOMOG2, LGH, D1, D2, LAGRANGE, HOMOG_GH, HOMOG_DH, HOMOG_FORCE, H3",
                  "p = 2", "tol = 1e-8", "expect_fail = H3"]
    lines += ["", "[domain]", "count = 200", "seed = 0", ""]
    return "\n".join(lines)


EXAMPLES = {
    "ex1": lambda **kw: EX1,
    "projective": lambda lam=1.0, dim=2, **kw: projective(lam, dim),
    "gyro-class": lambda **kw: GYRO_CLASS,
    "classic-gyro": lambda **kw: CLASSIC_GYRO,
    "finsler-gyro": lambda **kw: FINSLER_GYRO,
}


def example_text(name: str, **params) -> str:
    try:
        return EXAMPLES[name](**params)
    except KeyError:
        raise ProblemError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None


def example_problem(name: str, **params) -> ProblemFile:
    label = name if not params else name + "(" + ", ".join(f"{k}={v}" for k, v in sorted(params.items())) + ")"
    return ProblemFile.parse(example_text(name, **params), label)
