"""Configuration-driven command line: sweeps, cached solves, observable
extraction, effective-potential emission, and the built-in oracle suite.

Subcommands: solve | observables | sweep | verify | cache ls | cache rm.
Config is TOML with all values in paper units (E*, R*); any field can be
overridden with --set section.key=value. Exit codes: 0 ok, 2 config error,
3 solver non-convergence.
"""

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .cache import StateCache
from .eigensolve import ConvergenceError, ground_state_3d, lowest_eigenstates, solve_1d
from .grid import make_grid
from .hamiltonians import (TermFlags, build_h1b, build_if_hamiltonian,
                           build_relative_cmf, cm_solution)
from .meanfield import (effective_atom_potential, effective_ground_orbital,
                        effective_ion_potential, smf_solve_if)
from .observables import (bunching_probability, fidelity,
                          interatomic_separation_dist,
                          interspecies_separation_dist, lab_densities_from_if,
                          lab_energy_components, mean_separations,
                          number_state_overlaps, relative_density2,
                          TWO_BOSON_LABELS)
from .pipeline import (GridConfig, default_cache_root, h1b_orbitals, solve_cmf,
                       solve_if, SOLVER_TOL_2D, SOLVER_TOL_3D)
from .potentials import ModelParams, default_params

EMIT_TARGETS = ("spectrum", "separations", "energies", "overlaps",
                "fidelity", "effective", "densities")

DEFAULT_G = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 10.0, 15.0, 20.0, 40.0, 80.0]
DEFAULT_BETA = [0.0, 0.034, 1.0]


class ConfigError(Exception):
    """Invalid run configuration; message carries field-level diagnostics."""


@dataclass
class RunConfig:
    model: ModelParams = field(default_factory=default_params)
    grids: GridConfig = field(default_factory=GridConfig)
    g_values: list = field(default_factory=lambda: list(DEFAULT_G))
    beta_values: list = field(default_factory=lambda: list(DEFAULT_BETA))
    states: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    outdir: str = "atomion-out"
    cache_policy: str = "reuse"
    cache_root: str = field(default_factory=default_cache_root)
    emit: list = field(default_factory=lambda: ["spectrum"])
    workers: int = 1

    def validate(self):
        if not self.g_values:
            raise ConfigError("sweep.g: list must be non-empty")
        if any(g < 0 for g in self.g_values):
            raise ConfigError("sweep.g: contact strengths must be non-negative")
        if not self.beta_values:
            raise ConfigError("sweep.beta: list must be non-empty")
        if any(b < 0 for b in self.beta_values):
            raise ConfigError("sweep.beta: mass ratios must be non-negative")
        if not self.states or any(s not in (0, 1, 2, 3, 4) for s in self.states):
            raise ConfigError("sweep.states: state indices must lie in 0..4")
        bad = [e for e in self.emit if e not in EMIT_TARGETS]
        if bad:
            raise ConfigError(f"output.emit: unknown targets {bad}; valid: {list(EMIT_TARGETS)}")
        if self.cache_policy not in ("reuse", "recompute"):
            raise ConfigError("output.cache: must be 'reuse' or 'recompute'")
        needs_if = {"densities"} & set(self.emit)
        if needs_if and any(b == 0 for b in self.beta_values):
            raise ConfigError("output.emit: ion-frame targets (densities) require beta > 0 "
                              "for every sweep point; drop beta=0 or the target")
        if self.workers < 1:
            raise ConfigError("output.workers: must be >= 1")
        return self

    def k_states(self) -> int:
        return max(self.states) + 1

    def to_dict(self) -> dict:
        m = self.model
        return {
            "model": {"kappa": m.kappa, "v0": m.v0, "gamma": m.gamma, "l_A": m.l_A,
                      "eta": m.eta, "n_atoms": m.n_atoms},
            "grid": {"extent_rel": self.grids.extent_rel, "n_rel": self.grids.n_rel,
                     "extent_ion": self.grids.extent_ion, "n_ion": self.grids.n_ion,
                     "n_rel_3d": self.grids.n_rel_3d},
            "sweep": {"g": list(self.g_values), "beta": list(self.beta_values),
                      "states": list(self.states)},
            "output": {"directory": self.outdir, "cache": self.cache_policy,
                       "cache_root": self.cache_root, "emit": list(self.emit),
                       "workers": self.workers},
        }


def _build_config(data: dict) -> RunConfig:
    cfg = RunConfig()
    model_kw = {}
    sec = data.get("model", {})
    for key in ("kappa", "v0", "gamma", "l_A", "eta", "n_atoms"):
        if key in sec:
            model_kw[key] = sec[key]
    try:
        cfg.model = default_params().with_(**model_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    sec = data.get("grid", {})
    for toml_key, attr in (("extent_rel", "extent_rel"), ("n_rel", "n_rel"),
                           ("extent_ion", "extent_ion"), ("n_ion", "n_ion"),
                           ("n_rel_3d", "n_rel_3d")):
        if toml_key in sec:
            setattr(cfg.grids, attr, sec[toml_key])
    sec = data.get("sweep", {})
    if "g" in sec:
        cfg.g_values = [float(x) for x in sec["g"]]
    if "beta" in sec:
        cfg.beta_values = [float(x) for x in sec["beta"]]
    if "states" in sec:
        cfg.states = [int(x) for x in sec["states"]]
    sec = data.get("output", {})
    cfg.outdir = sec.get("directory", cfg.outdir)
    cfg.cache_policy = sec.get("cache", cfg.cache_policy)
    cfg.cache_root = sec.get("cache_root", cfg.cache_root)
    cfg.emit = list(sec.get("emit", cfg.emit))
    cfg.workers = int(sec.get("workers", cfg.workers))
    return cfg.validate()


def load_config(path: str | None, overrides: list[str] | None = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set needs section.key=value, got {item!r}")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"--set key must be section.key, got {key!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        data.setdefault(parts[0], {})[parts[1]] = value
    return _build_config(data)


# ---------------------------------------------------------------------------
# observable extraction for one sweep point

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def _point_rows(cfg: RunConfig, cache: StateCache, beta: float, g: float,
                orbitals, reuse: bool):
    """Solve (or load) one (beta, g) point and compute every requested observable."""
    p = cfg.model.with_(g=g, beta=beta)
    grid = cfg.grids.rel_grid()
    record, states, hit = solve_cmf(p, grid, k=cfg.k_states(), cache=cache, reuse=reuse)
    cm = cm_solution(p) if beta > 0 else None
    out = {"diag": {"beta": beta, "g": g, "cache_hit": hit,
                    "residuals": [float(r) for r in record.residuals],
                    "iterations": record.iterations},
           "rows": {}, "longrows": {}}

    emit = set(cfg.emit)
    for s in cfg.states:
        wf = states[s]
        row = {"beta": beta, "g": g, "state": s}
        if "spectrum" in emit:
            out["rows"].setdefault("spectrum", []).append(row | {
                "parity": record.parities[s],
                "energy_rel": record.eigenvalues[s],
                "energy_total": record.total_energies[s],
                "residual": record.residuals[s],
            })
        if "separations" in emit:
            d_aa, d_ai = mean_separations(wf)
            out["rows"].setdefault("separations", []).append(row | {
                "separation.d_AA": d_aa, "separation.d_AI": d_ai,
                "separation.P_bunched": bunching_probability(relative_density2(wf), grid),
            })
            rho2 = relative_density2(wf)
            for dist in (interatomic_separation_dist(rho2, grid),
                         interspecies_separation_dist(rho2, grid)):
                for x, rho in zip(dist.axis, dist.density):
                    out["longrows"].setdefault("separation_distributions", []).append(
                        row | {"kind": dist.kind, "x": x, "density": rho})
        if "energies" in emit:
            comp = lab_energy_components(wf, p, cm)
            out["rows"].setdefault("energies", []).append(row | {
                f"energy.{k}": v for k, v in comp.as_dict().items()})
        if "overlaps" in emit:
            spec = number_state_overlaps(wf, orbitals)
            ov = {f"overlap.{''.join(map(str, lab))}": w for lab, w in spec.entries}
            out["rows"].setdefault("overlaps", []).append(row | ov)
        if "fidelity" in emit:
            if beta > 0:
                refs = {}
                for name, (rb, rg) in (("mobile_g0", (beta, 0.0)),
                                       ("static_g0", (0.0, 0.0)),
                                       ("static_same_g", (0.0, g))):
                    rp = cfg.model.with_(g=rg, beta=rb)
                    _, ref_states, _ = solve_cmf(rp, grid, k=cfg.k_states(),
                                                 cache=cache, reuse=True)
                    refs[f"fidelity.{name}"] = fidelity(wf, ref_states[s])
                out["rows"].setdefault("fidelity", []).append(row | refs)
            else:
                out["rows"].setdefault("fidelity", []).append(row | {
                    "fidelity.mobile_g0": None, "fidelity.static_g0": None,
                    "fidelity.static_same_g": None})

    if "effective" in emit and beta > 0:
        smf = smf_solve_if(p, cfg.grids.rel_grid(), cfg.grids.ion_grid())
        pot_a = effective_atom_potential(smf.ion_density(), p, grid, source="smf")
        orb_a, e_a = effective_ground_orbital(pot_a, p)
        pot_i = effective_ion_potential(smf.atom_relative_density(), p,
                                        cfg.grids.ion_grid(), source="smf")
        orb_i, e_i = effective_ground_orbital(pot_i, p)
        for pot, orb, e_orb in ((pot_a, orb_a, e_a), (pot_i, orb_i, e_i)):
            for j in range(pot.grid.n):
                out["longrows"].setdefault("effective_potentials", []).append({
                    "beta": beta, "g": g, "species": pot.species, "source": pot.source,
                    "z": pot.grid.points[j], "potential": pot.values[j],
                    "orbital_density": orb[j] ** 2, "orbital_energy": e_orb})
        out["diag"]["smf_energy_total"] = smf.energy_total

    if "densities" in emit:
        result, if_hit = solve_if(p, cfg.grids.ion_grid(), cfg.grids.rel_grid_3d(),
                                  cache=cache, reuse=reuse)
        rho_a, rho_i = lab_densities_from_if(result.wavefn)
        for dens in (rho_a, rho_i):
            for j in range(dens.axis.size):
                out["longrows"].setdefault("lab_densities", []).append({
                    "beta": beta, "g": g, "species": dens.label,
                    "z": dens.axis[j], "density": dens.density[j]})
        out["diag"]["if_energy"] = result.energy
        out["diag"]["if_residual"] = result.residual
        out["diag"]["if_cache_hit"] = if_hit
    return out


def _write_csv(path: Path, rows: list[dict]):
    cols = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in cols) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run(cfg: RunConfig, solve_only: bool = False) -> int:
    """Execute a sweep: solve every point, emit CSVs and the manifest."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cache = StateCache(cfg.cache_root)
    reuse = cfg.cache_policy == "reuse"
    orbitals = None
    if "overlaps" in cfg.emit:
        _, orbitals = h1b_orbitals(cfg.model, cfg.grids.rel_grid())

    points = [(b, g) for b in cfg.beta_values for g in cfg.g_values]
    results = {}
    failures = []

    def do_point(point):
        beta, g = point
        try:
            if solve_only:
                p = cfg.model.with_(g=g, beta=beta)
                record, _, hit = solve_cmf(p, cfg.grids.rel_grid(), k=cfg.k_states(),
                                           cache=cache, reuse=reuse)
                return {"diag": {"beta": beta, "g": g, "cache_hit": hit,
                                 "residuals": [float(r) for r in record.residuals],
                                 "iterations": record.iterations},
                        "rows": {}, "longrows": {}}
            return _point_rows(cfg, cache, beta, g, orbitals, reuse)
        except ConvergenceError as exc:
            return {"diag": {"beta": beta, "g": g, "error": str(exc)},
                    "rows": {}, "longrows": {}}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for point, res in zip(points, pool.map(do_point, points)):
                results[point] = res
    else:
        for point in points:
            results[point] = do_point(point)

    # deterministic assembly: fixed point order, fixed column order
    tables = {}
    diags = []
    for point in points:
        res = results[point]
        diags.append(res["diag"])
        if "error" in res["diag"]:
            failures.append(point)
            continue
        for name, rows in res["rows"].items():
            tables.setdefault(name, []).extend(rows)
        for name, rows in res["longrows"].items():
            tables.setdefault(name, []).extend(rows)

    files = []
    for name in sorted(tables):
        path = outdir / f"{name}.csv"
        _write_csv(path, tables[name])
        files.append(path)

    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "points": diags,
        "files": [{"name": f.name, "sha256": _sha256(f)} for f in files],
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for point in failures:
        print(f"point beta={point[0]} g={point[1]}: solver did not converge", file=sys.stderr)
    return 3 if failures else 0


# ---------------------------------------------------------------------------
# oracle suite

VERIFY_CHECKS = ("analytic-oscillator", "bound-structure", "boundary-decay",
                 "hermiticity", "separable-limit", "grid-halving-1d",
                 "frame-equivalence")


def verify(cfg: RunConfig, checks: tuple = VERIFY_CHECKS) -> int:
    """Built-in oracle checks; prints one pass/fail line per check."""
    p0 = cfg.model.with_(g=0.0, beta=0.0)
    grid = cfg.grids.rel_grid()

    def chk_oscillator():
        w_osc, _ = solve_1d(build_h1b(grid, p0, TermFlags(atom_ion=False)))
        target = (2 * np.arange(4) + 1) / p0.l_A**2
        err = float(np.max(np.abs(w_osc[:4] - target) / target))
        return err < 1e-8, f"max rel err {err:.2e} (tol 1e-8)"

    def chk_bound():
        w1, _ = h1b_orbitals(p0, grid)
        nneg = int(np.sum(w1 < 0))
        return nneg == 2, f"{nneg} negative eigenvalues (want 2)"

    def chk_boundary():
        _, orbs = h1b_orbitals(p0, grid)
        bdens = float(max(np.max(orbs[0, :] ** 2), np.max(orbs[-1, :] ** 2)))
        return bdens < 1e-8, (f"max boundary density {bdens:.2e} (tol 1e-8); "
                              "increase grid.extent_rel if this fails")

    def chk_hermiticity():
        gh = make_grid(cfg.grids.extent_rel, min(cfg.grids.n_rel, 128))
        oph = build_relative_cmf(gh, cfg.model.with_(g=3.0, beta=1.0))
        rng = np.random.default_rng(11)
        f = rng.standard_normal((gh.n, gh.n))
        h = rng.standard_normal((gh.n, gh.n))
        f /= np.linalg.norm(f)
        h /= np.linalg.norm(h)
        herm = abs(float(np.sum(h * oph.apply(f)) - np.sum(oph.apply(h) * f))) * gh.dz**2
        return herm < 1e-10, f"<f|Hg>-<Hf|g> = {herm:.2e} (tol 1e-10)"

    def chk_separable():
        gs = make_grid(cfg.grids.extent_rel, min(cfg.grids.n_rel, 256))
        ws, _ = solve_1d(build_h1b(gs, p0))
        expected = np.sort([2 * ws[0], ws[0] + ws[1], 2 * ws[1],
                            ws[0] + ws[2], ws[0] + ws[3]])
        rec, _ = lowest_eigenstates(build_relative_cmf(gs, p0), k=5, tol=1e-9)
        sep = float(np.max(np.abs(rec.eigenvalues - expected)))
        return sep < 1e-8, f"max |E2D - (ei+ej)| = {sep:.2e} (tol 1e-8)"

    def chk_halving():
        w1, _ = h1b_orbitals(p0, grid)
        gfine = make_grid(grid.extent, 2 * grid.n)
        wf_, _ = solve_1d(build_h1b(gfine, p0))
        dh = float(np.max(np.abs(wf_[:4] - w1[:4])))
        return dh < 1e-6, f"max shift {dh:.2e} (tol 1e-6)"

    def chk_frames():
        pm = cfg.model.with_(g=0.0, beta=1.0)
        gr3 = make_grid(cfg.grids.extent_rel, 96)
        gi3 = make_grid(cfg.grids.extent_ion, 48)
        rec_m, _ = lowest_eigenstates(build_relative_cmf(gr3, pm), k=1,
                                      tol=1e-8, sectors=(+1,))
        res3 = ground_state_3d(build_if_hamiltonian(gi3, gr3, pm), tol=1e-6,
                               schedule=((2e-3, 600), (5e-4, 200)))
        e_cmf = float(rec_m.eigenvalues[0]) + cm_solution(pm).energy
        fdiff = abs(res3.energy - e_cmf) / abs(e_cmf)
        return fdiff < 0.01, f"|E_IF - (E_rel + E_R)|/|E| = {fdiff:.2e} (tol 1e-2)"

    table = {
        "analytic-oscillator": chk_oscillator,
        "bound-structure": chk_bound,
        "boundary-decay": chk_boundary,
        "hermiticity": chk_hermiticity,
        "separable-limit": chk_separable,
        "grid-halving-1d": chk_halving,
        "frame-equivalence": chk_frames,
    }
    ok = True
    for name in checks:
        passed, detail = table[name]()
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok = ok and passed
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# entry point

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="atomion",
        description="Spectra and observables of two trapped bosons coupled to a single ion "
                    "(all quantities in the E*, R* units of the polarisation potential)")
    parser.add_argument("--version", action="version", version=f"atomion {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("-c", "--config", default=None, help="TOML run configuration")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config field (repeatable)")

    p_solve = sub.add_parser("solve", help="run eigensolves for the sweep (populates the cache)")
    add_common(p_solve)
    p_obs = sub.add_parser("observables", help="emit observables, reusing cached states")
    add_common(p_obs)
    p_sweep = sub.add_parser("sweep", help="solve and emit observables in one pass")
    add_common(p_sweep)
    p_verify = sub.add_parser("verify", help="run the built-in oracle suite")
    add_common(p_verify)
    p_cache = sub.add_parser("cache", help="inspect or clear the eigenstate cache")
    p_cache.add_argument("action", choices=["ls", "rm"])
    p_cache.add_argument("--root", default=None, help="cache directory (default: env or ~/.cache/atomion)")

    args = parser.parse_args(argv)

    if args.command == "cache":
        cache = StateCache(args.root or default_cache_root())
        if args.action == "ls":
            for path, meta in cache.entries():
                model = meta.get("model", {})
                print(f"{path.name}  frame={meta.get('frame')}  "
                      f"beta={model.get('beta')}  g={model.get('g')}  grid={meta.get('grid')}")
            return 0
        n = cache.clear()
        print(f"removed {n} cached state file(s) from {cache.root}")
        return 0

    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "verify":
        return verify(cfg)
    if args.command == "solve":
        return run(cfg, solve_only=True)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
