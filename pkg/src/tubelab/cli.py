"""``tubelab`` command-line entry point.

Every command writes JSON (or CSV with ``--format csv``) to standard output.
Exit codes: 0 success, 1 a ``verify`` suite reported violations, 2 usage,
configuration or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NotInTube
from .seq_space import SparseVec

__all__ = ["Config", "ConfigError", "main", "dumps", "parse_vec", "vec_to_json"]

FLOAT_FMT = ".17g"
TUBE_COMMANDS = {"eval-pi", "invert-pi", "bump-eval", "bump-grad", "probe-rolle", "delete-map",
                 "retract", "homotopy", "sample-tube"}


class ConfigError(ValueError):
    pass


class UsageError(ValueError):
    pass


# serialization -----------------------------------------------------------------------

def _fmt_float(v: float) -> str:
    if math.isfinite(v):
        return format(v, FLOAT_FMT)
    return json.dumps(v)  # Infinity / NaN, as Python's json reads them


def _plain(obj):
    if isinstance(obj, SparseVec):
        return vec_to_json(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    obj = _plain(obj)

    def enc(o) -> str:
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _fmt_float(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            return "{" + ", ".join(f"{json.dumps(k)}: {enc(v)}" for k, v in o.items()) + "}"
        if isinstance(o, list):
            return "[" + ", ".join(enc(v) for v in o) + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj)


def vec_to_json(v: SparseVec) -> list:
    return [[int(i), float(c)] for i, c in zip(v.indices, v.values)]


def parse_vec(text) -> SparseVec:
    """A SparseVec from a JSON array of ``[index, coeff]`` pairs (string or parsed)."""
    data = json.loads(text) if isinstance(text, str) else text
    if isinstance(data, dict):
        if len(data) != 1:
            raise UsageError("expected an array of [index, coeff] pairs")
        data = next(iter(data.values()))
    if not isinstance(data, list) or not all(isinstance(p, list) and len(p) == 2 for p in data):
        raise UsageError("expected an array of [index, coeff] pairs")
    if not data:
        return SparseVec()
    idx = [p[0] for p in data]
    if not all(isinstance(i, int) and i >= 0 for i in idx):
        raise UsageError("indices must be non-negative integers")
    vals = np.array([p[1] for p in data], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise UsageError("coefficients must be finite")
    return SparseVec(idx, vals, _trusted=False)


def _csv_rows(obj) -> tuple[list[str], list[list]]:
    """Header and rows for CSV output: tables stay tables, records become key/value."""
    obj = _plain(obj)
    if isinstance(obj, list) and obj and all(isinstance(r, dict) for r in obj):
        header = list(obj[0])
        return header, [[r.get(k) for k in header] for r in obj]
    if isinstance(obj, list) and all(isinstance(r, list) and len(r) == 2 for r in obj):
        return ["index", "coeff"], obj
    flat: list[list] = []

    def walk(prefix, o):
        if isinstance(o, dict):
            for k, v in o.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(o, list):
            for i, v in enumerate(o):
                walk(f"{prefix}[{i}]", v)
        else:
            flat.append([prefix, o])

    walk("", obj)
    return ["key", "value"], flat


def to_csv(obj) -> str:
    header, rows = _csv_rows(obj)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt_float(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue().rstrip("\n")


# configuration ---------------------------------------------------------------------------

@dataclass
class Config:
    """Run settings; ``epsilon`` is the tube radius (``None`` picks a mode default)."""

    epsilon: float | None = None
    K_mode: str = "measured"
    scale_mode: str = "unit_ball"
    tolerances: dict = field(default_factory=lambda: {"root": 1e-12, "fd": 1e-5, "equality": 1e-8})
    seed: int = 0

    KEYS = ("epsilon", "K_mode", "scale_mode", "tolerances", "seed")

    @classmethod
    def load(cls, path: str | None, env=None) -> "Config":
        env = os.environ if env is None else env
        data = {}
        if path:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        data = {("K_mode" if k == "k_mode" else k): v for k, v in data.items()}
        unknown = set(data) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in data.items() if k != "tolerances"})
        cfg.tolerances = {**cls().tolerances, **data.get("tolerances", {})}
        if env.get("TUBELAB_SEED") not in (None, ""):
            try:
                cfg.seed = int(env["TUBELAB_SEED"])
            except ValueError:
                raise ConfigError("TUBELAB_SEED must be an integer") from None
        cfg.validate_fields()
        return cfg

    def validate_fields(self):
        if self.K_mode not in ("measured", "universal"):
            raise ConfigError("K_mode must be 'measured' or 'universal'")
        if self.scale_mode not in ("unit_ball", "raw"):
            raise ConfigError("scale_mode must be 'unit_ball' or 'raw'")
        if self.epsilon is not None and not (isinstance(self.epsilon, (int, float))
                                             and self.epsilon > 0):
            raise ConfigError("epsilon must be a positive number")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        unknown = set(self.tolerances) - {"root", "fd", "equality"}
        if unknown:
            raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"tolerance {k} must be positive")

    @property
    def scale(self) -> float:
        return 1.0 / 6.0 if self.scale_mode == "unit_ball" else 1.0

    def chart(self):
        """The tube chart for this configuration; enforces the radius constraint of ``K_mode``."""
        from .tube import DEFAULT_EPS, TubeChart, path_constants

        if self.K_mode == "universal":
            k = path_constants(self.scale).K_universal
            eps = self.epsilon if self.epsilon is not None else 0.5 / (6.0 * k ** 5)
            ch = TubeChart(epsilon=eps, scale=self.scale, K=k, root_tol=self.tolerances["root"])
            if not ch.meets_universal_bound:
                raise ConfigError(f"epsilon {eps:g} violates epsilon < 1/(6K^5) = "
                                  f"{ch.epsilon_universal_bound:.6g}")
            return ch
        eps = self.epsilon if self.epsilon is not None else DEFAULT_EPS
        ch = TubeChart(epsilon=eps, scale=self.scale, root_tol=self.tolerances["root"])
        bound = ch.epsilon_slope_bound()
        if not eps < bound:
            raise ConfigError(f"epsilon {eps:g} exceeds the measured-K radius bound {bound:.6g}")
        return ch

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "K_mode": self.K_mode, "scale_mode": self.scale_mode,
                "tolerances": dict(self.tolerances), "seed": self.seed}


# commands ----------------------------------------------------------------------------------

class Runner:
    def __init__(self, cfg: Config):
        self.cfg = cfg
        self._chart = None

    @property
    def chart(self):
        if self._chart is None:
            self._chart = self.cfg.chart()
        return self._chart

    def seed(self, flag):
        return self.cfg.seed if flag is None else flag

    def deleter(self):
        from .negligibility import DeletingDiffeo

        return DeletingDiffeo(self.chart)

    def toolkit(self):
        from .negligibility import StarlikeToolkit

        return StarlikeToolkit(deleter=self.deleter())

    def constants(self, a):
        from .tube import path_constants

        ch = self.chart
        return {"path": path_constants(1.0).to_dict(), "chart": ch.record(),
                "epsilon_slope_bound": ch.epsilon_slope_bound(),
                "outer_radius": ch.outer_radius, "config": self.cfg.to_dict()}

    def eval_pi(self, a):
        from .tube import CylPoint

        x = parse_vec(a.x)
        return {"y": self.chart.pi(CylPoint(x, a.t))}

    def invert_pi(self, a):
        y = parse_vec(a.y)
        pt = self.chart.pi_inverse(y)
        residual = (self.chart.pi(pt) - y).norm()
        if residual > self.cfg.tolerances["equality"] * max(1.0, y.norm()):
            raise DomainError(f"inverse residual {residual:.3g} above the equality tolerance")
        return {"x": pt.x, "t": pt.t, "residual": residual}

    def _bump(self, kind, block_epsilon=0.1):
        if kind == "non-rolle":
            from .rolle_bump import NonRolleBump

            return NonRolleBump(self.chart).f_eval
        if kind == "starlike":
            return self.toolkit().bump
        from .gradient_cone import BlockSum

        return BlockSum(block_epsilon).bump

    def bump_eval(self, a):
        return {"value": self._bump(a.kind, a.block_epsilon)(parse_vec(a.y))[0]}

    def bump_grad(self, a):
        fn = self._bump(a.kind, a.block_epsilon)
        y = parse_vec(a.y)
        val, g = fn(y)
        # block gradients carry an infinite tail: emit the leading blocks, exact norm
        shown = g.truncate(int(g.top) + 8) if hasattr(g, "truncate") else g
        out = {"value": val, "grad": shown, "grad_norm": g.norm()}
        if a.check:
            from .checks import directional_diff

            rng = np.random.default_rng(self.seed(None))
            d = SparseVec.from_dense(rng.standard_normal(max(y.max_index + 3, 8)))
            d = d / d.norm()
            fd = directional_diff(lambda u: fn(u)[0], y, d, self.cfg.tolerances["fd"])
            out["fd_check"] = {"analytic": g.dot(d), "difference": fd,
                               "abs_error": abs(g.dot(d) - fd)}
        return out

    def probe_rolle(self, a):
        from .rolle_bump import NonRolleBump, approx_rolle_probe

        center = parse_vec(a.center) if a.center else SparseVec()
        rep = approx_rolle_probe(NonRolleBump(self.chart).f_eval, center, a.radius, a.samples,
                                 seed=self.seed(a.seed))
        return rep.to_dict()

    def delete_map(self, a):
        dm = self.deleter()
        y = parse_vec(a.y)
        return {"y": dm.inverse(y) if a.inverse else dm(y)}

    def retract(self, a):
        return {"y": self.toolkit().retract(parse_vec(a.x))}

    def homotopy(self, a):
        return {"y": self.toolkit().homotopy(a.t, parse_vec(a.x))}

    def sample_tube(self, a):
        from .iso_path import p_dense

        if a.count < 1 or not a.tmax > 0:
            raise UsageError("need --count >= 1 and --tmax > 0")
        ts = np.linspace(0.0, a.tmax, a.count)
        P = self.chart.scale * p_dense(ts)
        z = self.chart.z.to_dense(P.shape[1])
        rows = []
        for t, row in zip(ts, P):
            r = {"t": float(t), "norm_p": float(np.linalg.norm(row)), "z_proj": float(row @ z)}
            r.update({f"p{k}": float(c) for k, c in enumerate(row)})
            rows.append(r)
        return rows

    def psi_approx(self, a):
        from .gradient_cone import BlockSum

        bs = BlockSum(a.epsilon)
        rng = np.random.default_rng(self.seed(a.seed))
        rows = []
        for k in range(a.samples):
            x = SparseVec.from_dense(rng.standard_normal(24) * rng.uniform(0, 1, 24) ** 3)
            r = 10.0 * k / max(a.samples - 1, 1)
            x = x * (r / x.norm()) if x.norm() > 0 else x
            rows.append({"norm": x.norm(), "psi": bs.psi(x)[0]})
        return rows

    def cone_cert(self, a):
        from .gradient_cone import BlockSum

        bs = BlockSum(a.epsilon)
        rng = np.random.default_rng(self.seed(a.seed))
        xs = []
        for _ in range(a.samples):
            dim = int(rng.integers(1, 40))
            xs.append(SparseVec.from_dense(rng.standard_normal(dim) * rng.uniform(0, 3)
                                           * rng.uniform(0, 1, dim) ** 3))
        return bs.cone_certificate(xs).to_dict()

    def verify(self, a):
        from .suites import SUITES, run_suite

        if a.suite != "all" and a.suite not in SUITES:
            raise UsageError(f"unknown suite {a.suite!r}; choose from all, {', '.join(SUITES)}")
        res = run_suite(a.suite, seed=self.seed(a.seed))
        checks = [{"suite": s, **c.to_dict()} for s, cs in res.items() for c in cs]
        failures = [c for c in checks if not c["ok"]]
        return {"suite": a.suite, "ok": not failures, "failures": failures,
                "checks": checks}, failures


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tubelab", description=__doc__.splitlines()[0])
    ap.add_argument("--format", choices=["json", "csv"], default=None,
                    help="output format (JSON unless the command produces a table)")
    ap.add_argument("--config", help="JSON config file")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    sub.add_parser("constants", help="measured path and chart constants")

    p = sub.add_parser("eval-pi", help="pi(x, t) for x in H")
    p.add_argument("--x", required=True, help="SparseVec JSON")
    p.add_argument("--t", type=float, required=True)

    p = sub.add_parser("invert-pi", help="(x, t) = pi^{-1}(y)")
    p.add_argument("--y", required=True, help="SparseVec JSON, or eval-pi output")

    for name in ("bump-eval", "bump-grad"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} of a bump at y")
        p.add_argument("--y", required=True, help="SparseVec JSON")
        p.add_argument("--kind", choices=["non-rolle", "starlike", "block"], default="non-rolle")
        p.add_argument("--block-epsilon", type=float, default=0.1,
                       help="epsilon of the block-sum bump (--kind block)")
        if name == "bump-grad":
            p.add_argument("--check", action="store_true",
                           help="compare with a finite difference along a random direction")

    p = sub.add_parser("probe-rolle", help="approximate Rolle probe of the tube bump")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--center", help="SparseVec JSON (default 0)")

    p = sub.add_parser("delete-map", help="the deleting diffeomorphism (or its inverse)")
    p.add_argument("--y", required=True, help="SparseVec JSON")
    p.add_argument("--inverse", action="store_true")

    p = sub.add_parser("retract", help="retraction of the unit ball onto the sphere")
    p.add_argument("--x", required=True, help="SparseVec JSON")

    p = sub.add_parser("homotopy", help="contraction of the unit sphere")
    p.add_argument("--x", required=True, help="SparseVec JSON on the unit sphere")
    p.add_argument("--t", type=float, required=True)

    p = sub.add_parser("sample-tube", help="points of the tube's central path (CSV)")
    p.add_argument("--tmax", type=float, default=20.0)
    p.add_argument("--count", type=int, default=201)

    p = sub.add_parser("psi-approx", help="(||x||, psi(x)) pairs (CSV)")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("cone-cert", help="blockwise-nonzero certificate for f'")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("suite", help="suite name or 'all'")
    p.add_argument("--seed", type=int)
    return ap


TABLE_COMMANDS = {"sample-tube", "psi-approx"}


def _emit(obj, fmt: str, out):
    out.write((to_csv(obj) if fmt == "csv" else dumps(obj)) + "\n")


def _fail(msg: str, code: int, err) -> int:
    err.write(dumps({"error": msg}) + "\n")
    return code


def main(argv=None, out=None, err=None, env=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fmt = args.format or ("csv" if args.command in TABLE_COMMANDS else "json")
    try:
        cfg = Config.load(args.config, env)
        runner = Runner(cfg)
        if args.command in TUBE_COMMANDS:
            runner.chart  # validates epsilon against the K_mode constraint
        result = getattr(runner, args.command.replace("-", "_"))(args)
    except (ConfigError, UsageError) as exc:
        return _fail(str(exc), 2, err)
    except (DomainError, NotInTube, ValueError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}", 2, err)
    if args.command == "verify":
        report, failures = result
        _emit(report, fmt, out)
        if failures:
            err.write(dumps(failures) + "\n")
            return 1
        return 0
    _emit(result, fmt, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
