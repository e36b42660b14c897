"""Run the checks and solves requested by a problem file and collect a RunReport."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

from . import __version__
from . import conditions as C
from . import solver as S
from .expr import Point
from .geometry import integrate_geodesic
from .problem import MissingSection, ProblemFile

GROUPS = {"LGH": ("LGH1", "LGH2", "LGH3"), "H": ("H1", "H2", "H3"), "FM": ("FMD", "FMA")}


@dataclass
class RunReport:
    command: str
    name: str
    input_digest: str
    settings: dict
    reports: list = dc_field(default_factory=list)
    expect_fail: tuple = ()
    solver: Optional[dict] = None
    status: str = ""
    timing: dict = dc_field(default_factory=dict)

    def report_ok(self, rep: C.ConditionReport) -> bool:
        return (not rep.passed) if rep.id in self.expect_fail else rep.passed

    @property
    def ok(self) -> bool:
        return all(self.report_ok(r) for r in self.reports)

    def finish(self) -> "RunReport":
        if self.command != "solve":
            self.status = "pass" if self.ok else "fail"
        return self

    def to_dict(self, timing: bool = True) -> dict:
        reps = []
        for r in self.reports:
            d = r.to_json()
            if r.id in self.expect_fail:
                d["expected_fail"] = True
            reps.append(d)
        out = {"tool": "hlab", "version": __version__, "command": self.command,
               "name": self.name, "input_digest": self.input_digest,
               "settings": self.settings, "reports": reps, "status": self.status}
        if self.solver is not None:
            out["solver"] = self.solver
        if timing:
            out["timing"] = self.timing
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    def lines(self) -> list[str]:
        out = [f"{self.command} {self.name}: {self.status}"]
        for r in self.reports:
            tag = "  (expected to fail)" if r.id in self.expect_fail else ""
            out.append(f"  {r}{tag}")
        if self.solver is not None:
            sv = self.solver
            out.append(f"  solve {sv['condition_set']}: basis {sv['basis']['size']}, "
                       f"system {sv['system_shape']}, nullity {sv['nullity']}, {sv['status']}")
            for k, sol in enumerate(sv["solutions"]):
                out.append(f"  solution {k + 1}:")
                out.append(f"    theta = ({', '.join(sol['theta_poly'])})")
                if sol["L"] is not None:
                    out.append(f"    L = {sol['L']}")
                if sol["D"] is not None:
                    out.append(f"    D = {sol['D']}")
                if sol["note"]:
                    out.append(f"    note: {sol['note']}")
        return out


def _need(value, cid: str, what: str):
    if value is None:
        raise MissingSection(f"{cid} requires {what}")
    return value


def _p(pf: ProblemFile, cid: str) -> float:
    if pf.p_deg is None:
        raise MissingSection(f"{cid} requires p in [check]")
    return pf.p_deg


def _trajectory(pf: ProblemFile, cid: str):
    tr = _need(pf.trajectory, cid, "[trajectory]")
    return integrate_geodesic(pf.sode, Point(tr["x0"], tr["y0"]), tr["h"], tr["steps"])


def run_condition(pf: ProblemFile, cid: str, cache: dict) -> list:
    """Reports for one [check] id (group ids expand to several reports)."""
    sode, dom, tol = pf.sode, pf.domain, pf.tol
    theta_need = "[theta] (or a polynomial [lagrangian])"
    if cid in ("LGH", "LGH1", "LGH2", "LGH3"):
        reps = C.check_lgh(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need),
                           sigma=pf.sigma_or_derived())
    elif cid in ("H", "H1", "H2", "H3"):
        reps = C.check_classic(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need))
    elif cid == "D1":
        reps = [C.check_d1(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need))]
    elif cid == "D2":
        D = _need(pf.D, cid, "[dissipation]")
        reps = [C.check_d2(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need), D=D)]
    elif cid == "D3":
        reps = [C.check_d3(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need))]
    elif cid == "OBSTRUCTION":
        reps = [C.check_obstruction(sode, dom, tol,
                                    theta=_need(pf.theta_or_derived(), cid, theta_need))]
    elif cid == "G1":
        theta = pf.theta_or_derived()
        omega = _need(pf.omega_or_derived(), cid,
                      "[omega] or a polynomial [theta] from which omega can be derived")
        reps = [C.check_g1(sode, dom, tol, theta=_need(theta, cid, theta_need), omega=omega)]
    elif cid == "G2":
        reps = [C.check_g2(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need))]
    elif cid == "GNV":
        gc = _need(pf.gyro, cid, "[gyro]")
        reps = [C.check_gyro_class(gc, dom, tol)[0]]
    elif cid == "LIE_CLOSED":
        reps = [C.check_lie_closed(sode, dom, tol,
                                        theta=_need(pf.theta_or_derived(), cid, theta_need),
                                        sigma=pf.sigma_or_derived())]
    elif cid == "LAGRANGE":
        L = _need(pf.L, cid, "[lagrangian]")
        if pf.D is not None:
            reps = [C.check_lagrange(sode, dom, tol, L=L, D=pf.D)]
        else:
            reps = [C.check_lagrange(sode, dom, tol, L=L, sigma=pf.sigma_or_derived())]
    elif cid in ("ENERGY", "ENERGY_DRIFT"):
        L = _need(pf.L, cid, "[lagrangian]")
        if "traj" not in cache:
            cache["traj"] = _trajectory(pf, cid)
        if cid == "ENERGY":
            reps = [C.check_energy_variation(sode, cache["traj"], L=L, sigma=pf.sigma_or_derived())]
        else:
            reps = [C.check_energy_drift(sode, cache["traj"], L=L)]
    elif cid == "HOMOG2":
        reps = [C.check_spray_homogeneity(sode, dom, tol)]
    elif cid in ("FM", "FMD", "FMA"):
        reps = C.check_fm(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need))
    elif cid == "HOMOG_GH":
        reps = C.check_homogeneous(sode, dom, _p(pf, cid), tol,
                                   theta=_need(pf.theta_or_derived(), cid, theta_need),
                                   sigma=_need(pf.sigma_or_derived(), cid, "[sigma] or [dissipation]"))
    elif cid == "HOMOG_DH":
        reps = [C.check_homog_dh(sode, dom, _p(pf, cid), tol, L=_need(pf.L, cid, "[lagrangian]"),
                             sigma=_need(pf.sigma_or_derived(), cid, "[sigma] or [dissipation]"))]
    elif cid == "HOMOG_FORCE":
        reps = [C.check_homog_force(sode, dom, _p(pf, cid), tol, L=_need(pf.L, cid, "[lagrangian]"),
                             sigma=pf.sigma_or_derived())]
    elif cid == "ONE_HOMOG":
        reps = C.check_one_homog(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need),
                            sigma=pf.sigma_or_derived())
    elif cid == "ONE_HOMOG_GYRO":
        reps = [C.check_one_homog_gyro(sode, dom, tol, theta=_need(pf.theta_or_derived(), cid, theta_need),
                             omega=_need(pf.omega_or_derived(), cid, "[omega]"))]
    else:
        raise MissingSection(f"unknown condition id {cid!r}")
    if cid in ("LGH1", "LGH2", "LGH3", "H1", "H2", "H3", "FMD", "FMA"):
        reps = [r for r in reps if r.id == cid]
    return reps


def run_check(pf: ProblemFile, command: str = "check") -> RunReport:
    t0 = time.perf_counter()
    rr = RunReport(command, pf.name, pf.digest, pf.effective_settings(),
                   expect_fail=pf.expect_fail)
    cache: dict = {}
    for cid in pf.check_ids:
        rr.reports.extend(run_condition(pf, cid, cache))
    rr.timing["seconds"] = time.perf_counter() - t0
    return rr.finish()


def run_solve(pf: ProblemFile) -> RunReport:
    t0 = time.perf_counter()
    rr = RunReport("solve", pf.name, pf.digest, pf.effective_settings())
    cfg = pf.solve
    if cfg["set"] not in S.CONDITION_SETS:
        raise MissingSection(f"[solve] set must be one of {', '.join(S.CONDITION_SETS)}")
    sigma = pf.sigma_or_derived() if cfg["set"] == "GH" else None
    if cfg["set"] == "GH" and sigma is None:
        raise MissingSection("GH requires [sigma] or [dissipation]")
    basis = S.AnsatzBasis.monomial(pf.dim, cfg["deg_y"], cfg["deg_x"])
    res = S.solve(pf.sode, basis, cfg["set"], pf.domain, sigma=sigma,
                  rank_tol=cfg["rank_tol"], verify_tol=10 * pf.tol)
    rr.solver = res.to_json()
    for sol in res.solutions:
        rr.reports.extend(sol.reports)
    rr.status = res.status
    rr.timing["seconds"] = time.perf_counter() - t0
    return rr
