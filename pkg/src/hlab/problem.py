"""INI-style problem files.

A problem file is read with :mod:`configparser` (no interpolation, keys are
case-insensitive). Sections and keys::

    [sode]         dim, g1 .. gn, homog2 (bool)
    [gyro]         g (rows separated by ';'), n11 .. nnn, v1 .. vn   (x only)
    [theta]        theta1 .. thetan
    [sigma]        sigma1 .. sigman
    [lagrangian]   L
    [dissipation]  D
    [omega]        w<i>_<j> for i < j, x only (w12 is accepted for n < 10)
    [domain]       x_low, x_high (comma lists), r_min, r_max, count, seed
    [check]        ids (comma list), tol, p, expect_fail (comma list)
    [solve]        set, deg_y, deg_x, rank_tol
    [trajectory]   x0, y0 (comma lists), h, steps

``[sode]`` may be omitted when ``[gyro]`` is present; the semispray is then
G = N y + V/2. Every expression is parsed when the file is loaded.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from .conditions import DEFAULT_TOL, BasicTwoForm, GyroClass, SampleDomain
from .expr import HlabError, ScalarField, parse_scalar_field
from .geometry import SemiBasicOneForm, SodeSystem
from .polynomial import NotPolynomial, Poly
from .solver import DEFAULT_RANK_TOL

DEFAULT_CHECK_IDS = ("LGH",)
DEFAULT_SOLVE = {"set": "D1", "deg_y": 2, "deg_x": 2, "rank_tol": DEFAULT_RANK_TOL}
DEFAULT_TRAJECTORY = {"h": 1e-3, "steps": 2000}


class ProblemError(HlabError):
    pass


class MissingSection(ProblemError):
    pass


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ProblemError(f"not a boolean: {s!r}")


@dataclass
class ProblemFile:
    text: str
    name: str = "<string>"
    dim: int = 0
    sode: Optional[SodeSystem] = None
    gyro: Optional[GyroClass] = None
    theta: Optional[SemiBasicOneForm] = None
    sigma: Optional[SemiBasicOneForm] = None
    L: Optional[ScalarField] = None
    D: Optional[ScalarField] = None
    omega: Optional[BasicTwoForm] = None
    domain: Optional[SampleDomain] = None
    check_ids: tuple = DEFAULT_CHECK_IDS
    tol: float = DEFAULT_TOL
    p_deg: Optional[float] = None
    expect_fail: tuple = ()
    solve: dict = dc_field(default_factory=lambda: dict(DEFAULT_SOLVE))
    trajectory: Optional[dict] = None
    sections: tuple = ()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    # --- loading -------------------------------------------------------------
    @classmethod
    def load(cls, path) -> "ProblemFile":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ProblemError(f"cannot read {path}: {exc}") from None
        return cls.parse(text, path.name)

    @classmethod
    def parse(cls, text: str, name: str = "<string>") -> "ProblemFile":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ProblemError(f"{name}: {exc}") from None
        pf = cls(text, name, sections=tuple(cp.sections()))
        if cp.has_section("gyro"):
            pf._load_gyro(cp["gyro"])
        if cp.has_section("sode"):
            pf._load_sode(cp["sode"])
        elif pf.gyro is not None:
            pf.sode = pf.gyro.sode()
            pf.dim = pf.gyro.dim
        else:
            raise MissingSection(f"{name}: a problem needs [sode] (or [gyro])")
        n = pf.dim
        if cp.has_section("theta"):
            pf.theta = SemiBasicOneForm(n, pf._vector(cp["theta"], "theta"))
        if cp.has_section("sigma"):
            pf.sigma = SemiBasicOneForm(n, pf._vector(cp["sigma"], "sigma"))
        if cp.has_section("lagrangian"):
            pf.L = pf._field(cp["lagrangian"], "l")
        if cp.has_section("dissipation"):
            pf.D = pf._field(cp["dissipation"], "d")
        if cp.has_section("omega"):
            pf.omega = pf._load_omega(cp["omega"])
        pf.domain = pf._load_domain(cp["domain"] if cp.has_section("domain") else {})
        if cp.has_section("check"):
            sec = cp["check"]
            if "ids" in sec:
                pf.check_ids = tuple(s.strip().upper() for s in sec["ids"].split(",") if s.strip())
            pf.tol = float(sec.get("tol", pf.tol))
            if "p" in sec:
                pf.p_deg = float(sec["p"])
            pf.expect_fail = tuple(s.strip().upper() for s in sec.get("expect_fail", "").split(",")
                                   if s.strip())
        if cp.has_section("solve"):
            sec = cp["solve"]
            pf.solve = {"set": sec.get("set", DEFAULT_SOLVE["set"]).strip(),
                        "deg_y": int(sec.get("deg_y", DEFAULT_SOLVE["deg_y"])),
                        "deg_x": int(sec.get("deg_x", DEFAULT_SOLVE["deg_x"])),
                        "rank_tol": float(sec.get("rank_tol", DEFAULT_SOLVE["rank_tol"]))}
        if cp.has_section("trajectory"):
            sec = cp["trajectory"]
            try:
                x0, y0 = _floats(sec["x0"]), _floats(sec["y0"])
            except KeyError as exc:
                raise ProblemError(f"[trajectory] needs {exc.args[0]}") from None
            if len(x0) != n or len(y0) != n:
                raise ProblemError("[trajectory] x0 and y0 need dim entries")
            pf.trajectory = {"x0": x0, "y0": y0,
                             "h": float(sec.get("h", DEFAULT_TRAJECTORY["h"])),
                             "steps": int(sec.get("steps", DEFAULT_TRAJECTORY["steps"]))}
        return pf

    def _load_sode(self, sec) -> None:
        if "dim" not in sec:
            raise ProblemError("[sode] needs dim")
        n = int(sec["dim"])
        if n < 1:
            raise ProblemError("[sode] dim must be >= 1")
        if self.gyro is not None and self.gyro.dim != n:
            raise ProblemError("[sode] dim does not match [gyro]")
        self.dim = n
        G = []
        for i in range(1, n + 1):
            if f"g{i}" not in sec:
                raise ProblemError(f"[sode] missing g{i}")
            G.append(parse_scalar_field(sec[f"g{i}"], n))
        self.sode = SodeSystem(n, tuple(G), _bool(sec.get("homog2", "false")))

    def _load_gyro(self, sec) -> None:
        if "g" not in sec:
            raise ProblemError("[gyro] needs g")
        rows = [_floats(r) for r in sec["g"].split(";") if r.strip()]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ProblemError("[gyro] g must be square")
        N = [[sec.get(f"n{i}{j}", "0") for j in range(1, n + 1)] for i in range(1, n + 1)]
        V = [sec.get(f"v{i}", "0") for i in range(1, n + 1)]
        self.gyro = GyroClass.from_strings(rows, N, V)
        self.dim = n

    def _vector(self, sec, prefix: str) -> tuple:
        n = self.dim
        out = []
        for i in range(1, n + 1):
            key = f"{prefix}{i}"
            if key not in sec:
                raise ProblemError(f"[{sec.name}] missing {key}")
            out.append(parse_scalar_field(sec[key], n))
        return tuple(out)

    def _field(self, sec, key: str) -> ScalarField:
        if key not in sec:
            raise ProblemError(f"[{sec.name}] missing {key.upper()}")
        return parse_scalar_field(sec[key], self.dim)

    def _load_omega(self, sec) -> BasicTwoForm:
        n = self.dim
        entries = {}
        for key, val in sec.items():
            k = key[1:] if key.startswith("w") else key
            try:
                i, j = (int(s) for s in k.split("_")) if "_" in k else (int(k[0]), int(k[1:]))
            except ValueError:
                raise ProblemError(f"[omega] bad key {key!r}; use w<i>_<j>") from None
            if not 1 <= i < j <= n:
                raise ProblemError(f"[omega] key {key!r} needs 1 <= i < j <= {n}")
            entries[(i, j)] = val
        return BasicTwoForm.from_upper(n, entries)

    def _load_domain(self, sec) -> SampleDomain:
        n = self.dim
        kw = {"n": n}
        for key in ("x_low", "x_high"):
            if key in sec:
                v = _floats(sec[key])
                kw[key] = tuple(v * n if len(v) == 1 else v)
        for key in ("r_min", "r_max"):
            if key in sec:
                kw[key] = float(sec[key])
        for key in ("count", "seed"):
            if key in sec:
                kw[key] = int(sec[key])
        return SampleDomain(**kw)

    # --- derived data --------------------------------------------------------
    def sigma_or_derived(self) -> Optional[SemiBasicOneForm]:
        """[sigma], else d_J of [dissipation] (polynomial D), else the gyroscopic i_S omega."""
        if self.sigma is not None:
            return self.sigma
        if self.D is not None:
            try:
                P = Poly.from_field(self.D)
            except NotPolynomial:
                return None
            return SemiBasicOneForm(self.dim, tuple(P.diff("y", i + 1).to_field()
                                                    for i in range(self.dim)))
        if self.gyro is not None:
            return self.gyro.sigma()
        return None

    def theta_or_derived(self) -> Optional[SemiBasicOneForm]:
        if self.theta is not None:
            return self.theta
        if self.L is not None:
            try:
                P = Poly.from_field(self.L)
            except NotPolynomial:
                return None
            return SemiBasicOneForm(self.dim, tuple(P.diff("y", i + 1).to_field()
                                                    for i in range(self.dim)))
        if self.gyro is not None:
            return self.gyro.theta()
        return None

    def omega_or_derived(self) -> Optional[BasicTwoForm]:
        """[omega], the gyroscopic omega, or d_h theta computed exactly for polynomial data."""
        if self.omega is not None:
            return self.omega
        if self.gyro is not None:
            return self.gyro.omega()
        theta = self.theta_or_derived()
        if theta is None:
            return None
        try:
            return polynomial_dh(self.sode, theta)
        except (NotPolynomial, HlabError):
            return None

    def effective_settings(self) -> dict:
        return {"domain": self.domain.as_dict(), "tol": self.tol, "p": self.p_deg,
                "check_ids": list(self.check_ids), "expect_fail": list(self.expect_fail),
                "solve": dict(self.solve), "trajectory": self.trajectory}


def polynomial_dh(sode: SodeSystem, theta: SemiBasicOneForm) -> BasicTwoForm:
    """omega_ij = delta theta_i/delta x^j - delta theta_j/delta x^i as a basic 2-form.

    Raises NotPolynomial for non-polynomial input and DimensionError when the
    result depends on y.
    """
    n = sode.dim
    G = [Poly.from_field(g) for g in sode.G]
    th = [Poly.from_field(c) for c in theta.comp]
    N = [[G[i].diff("y", j + 1) for j in range(n)] for i in range(n)]

    def dh(i, j):
        acc = th[i].diff("x", j + 1)
        for k in range(n):
            acc = acc - N[k][j] * th[i].diff("y", k + 1)
        return acc

    entries = {}
    for i in range(n):
        for j in range(i + 1, n):
            entries[(i + 1, j + 1)] = (dh(i, j) - dh(j, i)).cleaned().to_field()
    return BasicTwoForm.from_upper(n, entries)
