"""Experiment specs, figure presets, sweep execution and CSV output."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import __version__
from .diversity import CoherentInput, Placement, SchemeConfig, compare_fidelity, map_cells
from .errors import DomainError
from .fading import DEFAULT_FLOOR, DEFAULT_SIGMA, ExpectationPlan, from_mean
from .qkd import Detection, KeyRateConfig, TEffRule, Units, average_key_rate_diversity, average_key_rate_multiplexing

KINDS = ("fidelity-sweep", "fidelity-ratio-grid", "crosstalk-grid", "skr-vs-loss", "skr-vs-N")
FIDELITY_KINDS = KINDS[:3]
DB_CONVENTION = "avg_T = 10^(-dB/10)"

_T_AXIS = "0.05:0.95:20"
_NTH_AXIS = "0:1:20"

PRESETS: dict[str, dict[str, str]] = {
    "fig2": {"kind": "fidelity-sweep", "placement": "postprocessing", "n_th": "0.9"},
    "fig3": {"kind": "fidelity-ratio-grid", "placement": "postprocessing"},
    "fig4": {"kind": "fidelity-sweep", "placement": "post-amplification", "n_th": "0.7"},
    "fig5": {"kind": "fidelity-ratio-grid", "placement": "post-amplification"},
    "fig6": {"kind": "fidelity-sweep", "placement": "pre-amplification", "n_th": "0.7"},
    "fig7": {"kind": "fidelity-ratio-grid", "placement": "pre-amplification"},
    "crosstalk-postprocessing": {"kind": "crosstalk-grid", "placement": "postprocessing"},
    "crosstalk-post-amplification": {"kind": "crosstalk-grid", "placement": "post-amplification"},
    "crosstalk-pre-amplification": {"kind": "crosstalk-grid", "placement": "pre-amplification"},
    "fig8a": {"kind": "skr-vs-loss", "detection": "heterodyne", "v_in": "10"},
    "fig8b": {"kind": "skr-vs-loss", "detection": "homodyne", "v_in": "5"},
    "fig9a": {"kind": "skr-vs-N", "detection": "heterodyne", "v_in": "10", "loss_db": "4"},
    "fig9b": {"kind": "skr-vs-N", "detection": "homodyne", "v_in": "5", "loss_db": "2"},
}

_KIND_DEFAULTS: dict[str, dict[str, str]] = {
    "fidelity-sweep": {"mean_T": _T_AXIS, "n_th": "0.9"},
    "fidelity-ratio-grid": {"mean_T": _T_AXIS, "n_th": _NTH_AXIS},
    "crosstalk-grid": {"mean_T": _T_AXIS, "eta_ct": "0:1:20", "n_th": "0.2"},
    "skr-vs-loss": {"loss_db": "1:20:20", "orders": "2", "n_th": "0.2"},
    "skr-vs-N": {"loss_db": "4", "orders": "1,2,3,4,5,6", "n_th": "0", "method": "mc"},
}

_COMMON_DEFAULTS = {
    "placement": "postprocessing",
    "combine_eta": "0.5",
    "gains": "",
    "order": "2",
    "sigma": str(DEFAULT_SIGMA),
    "floor": str(DEFAULT_FLOOR),
    "x": "1",
    "p": "1",
    "v_in": "10",
    "beta": "1",
    "detection": "heterodyne",
    "units": "shot-noise",
    "t_eff_rule": "arithmetic",
    "mean_T": "",
    "eta_ct": "",
    "orders": "",
    "loss_db": "",
    "method": "quadrature",
    "nodes": "64",
    "samples": "100000",
    "seed": "0",
    "workers": "1",
    "out": "",
}

KEYS = tuple(sorted(set(_COMMON_DEFAULTS) | {"n_th", "kind", "preset"}))


def parse_axis(text: str) -> tuple[float, ...]:
    """Comma list of numbers, or ``start:stop:count`` for evenly spaced points."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:count, got {text!r}")
        count = int(parts[2])
        if count < 1:
            raise ValueError("range count must be >= 1")
        return tuple(float(v) for v in np.linspace(float(parts[0]), float(parts[1]), count))
    return tuple(float(v) for v in text.split(","))


def db_to_transmittance(db: float) -> float:
    return 10.0 ** (-db / 10.0)


def transmittance_to_db(t: float) -> float:
    return -10.0 * math.log10(t)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    scheme: SchemeConfig
    key_rate: KeyRateConfig
    coherent: CoherentInput
    plan: ExpectationPlan
    sigma: float = DEFAULT_SIGMA
    floor: float = DEFAULT_FLOOR
    mean_T: tuple[float, ...] = ()
    n_th: tuple[float, ...] = ()
    eta_ct: tuple[float, ...] = ()
    orders: tuple[int, ...] = ()
    loss_db: tuple[float, ...] = ()
    preset: str = ""
    out: str = ""
    workers: int = 1

    def metadata(self) -> dict[str, str]:
        fmt = lambda xs: ",".join(f"{v:.12g}" for v in xs)
        meta = {
            "software": f"cvdiversity {__version__}",
            "kind": self.kind,
            "preset": self.preset or "none",
            "sigma_T": f"{self.sigma:.12g}",
            "floor": f"{self.floor:.12g}",
            "method": self.plan.method,
            "nodes": str(self.plan.node_count),
            "samples": str(self.plan.sample_count),
            "seed": str(self.plan.seed),
            "n_th": fmt(self.n_th),
        }
        if self.kind in FIDELITY_KINDS:
            meta.update(
                placement=self.scheme.placement.value,
                diversity_order=str(self.scheme.diversity_order),
                combine_eta=f"{self.scheme.combine_eta:.12g}",
                gain_policy=self.scheme.gain_policy,
                gains=fmt(self.scheme.gains or ()),
                x=f"{self.coherent.x:.12g}",
                p=f"{self.coherent.p:.12g}",
                mean_T=fmt(self.mean_T),
                eta_ct=fmt(self.eta_ct) if self.eta_ct else "none",
            )
        else:
            kr = self.key_rate
            meta.update(
                v_in=f"{kr.v_in:.12g}",
                beta=f"{kr.beta:.12g}",
                detection=kr.detection.name.lower(),
                units=kr.units.value,
                t_eff_rule=kr.t_eff_rule.value,
                orders=",".join(str(n) for n in self.orders),
                loss_db=fmt(self.loss_db),
                db_convention=DB_CONVENTION,
            )
        return meta


def _merge(*layers: Mapping[str, str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for layer in layers:
        for key, value in layer.items():
            key = key.strip().replace("-", "_")
            if key not in KEYS:
                raise DomainError(f"unknown setting {key!r}")
            out[key] = str(value)
    return out


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def parse_spec(
    kind: str | None = None,
    settings: Mapping[str, str] | None = None,
    preset: str | None = None,
    config: Mapping[str, str] | None = None,
) -> ExperimentSpec:
    """Resolve an experiment from a preset, a config mapping and explicit settings.

    Later layers win: kind defaults < preset < config < settings.
    """
    settings = dict(settings or {})
    config = dict(config or {})
    preset = preset or settings.pop("preset", None) or config.pop("preset", None)
    layer = {}
    if preset:
        if preset not in PRESETS:
            raise DomainError(f"preset: unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
        layer = PRESETS[preset]
        if kind and kind != layer["kind"]:
            raise DomainError(f"preset: {preset!r} is a {layer['kind']} experiment, not {kind}")
    user = _merge(layer, config, settings)
    kind = user.get("kind") or kind
    if kind not in KINDS:
        raise DomainError(f"kind: unknown experiment kind {kind!r}")
    raw = {**_COMMON_DEFAULTS, **_KIND_DEFAULTS[kind], **user}

    def conv(key, fn):
        try:
            return fn(raw[key])
        except DomainError as exc:
            raise DomainError(f"{key}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise DomainError(f"{key}: invalid value {raw[key]!r} ({exc})") from None

    def check(key, values, ok, what):
        bad = [v for v in values if not ok(v)]
        if bad:
            raise DomainError(f"{key}: {bad[0]:.6g} is outside {what}")
        return values

    order = conv("order", lambda v: SchemeConfig(diversity_order=int(v)).diversity_order)
    placement = conv("placement", Placement)
    gains = conv("gains", lambda v: SchemeConfig(gains=parse_axis(v) or None, diversity_order=order).gains)
    combine_eta = conv("combine_eta", lambda v: SchemeConfig(combine_eta=float(v)).combine_eta)
    scheme = SchemeConfig(placement, combine_eta, gains=gains, diversity_order=order)
    eta_ct = check("eta_ct", conv("eta_ct", parse_axis), lambda v: 0 <= v <= 1, "[0, 1]")
    n_th = check("n_th", conv("n_th", parse_axis), lambda v: v >= 0, "[0, inf)")
    key_rate = KeyRateConfig(
        conv("v_in", lambda v: KeyRateConfig(v_in=float(v)).v_in),
        n_th[0] if n_th else 0.0,
        conv("beta", lambda v: KeyRateConfig(beta=float(v)).beta),
        conv("detection", Detection.parse),
        conv("units", Units),
        conv("t_eff_rule", TEffRule),
    )
    plan = ExpectationPlan(
        conv("method", lambda v: ExpectationPlan(method=v).method),
        conv("nodes", lambda v: ExpectationPlan(node_count=int(v)).node_count),
        conv("samples", lambda v: ExpectationPlan(sample_count=int(v)).sample_count),
        conv("seed", lambda v: ExpectationPlan(seed=int(v)).seed),
    )
    spec = ExperimentSpec(
        kind=kind,
        scheme=scheme,
        key_rate=key_rate,
        coherent=CoherentInput(conv("x", float), conv("p", float)),
        plan=plan,
        sigma=check("sigma", (conv("sigma", float),), lambda v: 0 < v < math.inf, "(0, inf)")[0],
        floor=check("floor", (conv("floor", float),), lambda v: 0 < v < 1, "(0, 1)")[0],
        mean_T=check("mean_T", conv("mean_T", parse_axis), lambda v: 0 < v < 1, "(0, 1)"),
        n_th=n_th,
        eta_ct=eta_ct,
        orders=tuple(int(v) for v in check("orders", conv("orders", parse_axis), lambda v: v >= 1 and v == int(v), "positive integers")),
        loss_db=check("loss_db", conv("loss_db", parse_axis), lambda v: 0 < v < math.inf, "(0, inf) dB"),
        preset=preset or "",
        out=raw["out"],
        workers=check("workers", (conv("workers", int),), lambda v: v >= 1, "[1, inf)")[0],
    )
    _require_axes(spec)
    return spec


def _require_axes(spec: ExperimentSpec) -> None:
    need = {
        "fidelity-sweep": ("mean_T", "n_th"),
        "fidelity-ratio-grid": ("mean_T", "n_th"),
        "crosstalk-grid": ("mean_T", "n_th", "eta_ct"),
        "skr-vs-loss": ("n_th", "orders"),
        "skr-vs-N": ("n_th", "orders"),
    }[spec.kind]
    for axis in need:
        if not getattr(spec, axis):
            raise DomainError(f"{axis}: axis must not be empty for {spec.kind}")
    if spec.kind.startswith("skr") and not (spec.loss_db or spec.mean_T):
        raise DomainError("loss_db: give loss_db or mean_T for a key-rate sweep")


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple[float, ...]] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = [tuple(float(v) for v in r) for r in self.rows]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise DomainError(f"row has {len(r)} values for {len(self.columns)} columns")

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])


def _with_point(fn, describe):
    def run(cell):
        try:
            return fn(cell)
        except DomainError as exc:
            raise DomainError(f"at {describe(cell)}: {exc}") from exc

    return run


def _fidelity_table(spec: ExperimentSpec) -> ResultTable:
    n = spec.scheme.diversity_order
    models = {t: from_mean(t, spec.sigma, spec.floor) for t in spec.mean_T}
    etas = spec.eta_ct if spec.kind == "crosstalk-grid" else (None,)
    cells = list(itertools.product(spec.mean_T, etas, spec.n_th))

    def cell(c):
        t, eta, nth = c
        cfg = SchemeConfig(
            spec.scheme.placement, spec.scheme.combine_eta, eta, spec.scheme.gains, spec.scheme.diversity_order
        )
        return compare_fidelity(cfg, models[t], nth, spec.coherent, spec.plan)

    describe = lambda c: f"avg_T={c[0]:.6g}, eta_ct={c[1]}, n_th={c[2]:.6g}"
    results = map_cells(_with_point(cell, describe), cells, spec.workers)
    cols = ["avg_T"] + (["eta_ct"] if spec.kind == "crosstalk-grid" else []) + [
        "n_th", f"F_avg_div{n}", "F_avg_div0", "log10_ratio", f"F_div{n}_error", "F_div0_error",
    ]
    rows = []
    for (t, eta, nth), r in zip(cells, results):
        lead = (t,) if eta is None else (t, eta)
        rows.append(lead + (nth, r.diversity, r.baseline, r.log10_ratio, r.diversity_error, r.baseline_error))
    return ResultTable(cols, rows, spec.metadata())


def _key_rate_table(spec: ExperimentSpec) -> ResultTable:
    if spec.loss_db:
        points = [(db, db_to_transmittance(db)) for db in spec.loss_db]
    else:
        points = [(transmittance_to_db(t), t) for t in spec.mean_T]
    models = {t: from_mean(t, spec.sigma, spec.floor) for _, t in points}
    cells = list(itertools.product(points, spec.n_th, spec.orders))
    base = spec.key_rate

    def cell(c):
        (_, t), nth, order = c
        cfg = KeyRateConfig(base.v_in, nth, base.beta, base.detection, base.units, base.t_eff_rule)
        div = average_key_rate_diversity(cfg, models[t], order, spec.plan)
        mux = average_key_rate_multiplexing(cfg, models[t], order, spec.plan)
        return div, mux

    describe = lambda c: f"loss_dB={c[0][0]:.6g}, n_th={c[1]:.6g}, N={c[2]}"
    results = map_cells(_with_point(cell, describe), cells, spec.workers)
    cols = (
        "loss_dB", "avg_T", "n_th", "N",
        "K_div_raw", "K_div_clamped", "K_mux_raw", "K_mux_clamped",
        "K_div_raw_error", "K_div_clamped_error",
    )
    rows = [
        (db, t, nth, order, d.raw, d.clamped, m.raw, m.clamped, d.raw_error, d.clamped_error)
        for ((db, t), nth, order), (d, m) in zip(cells, results)
    ]
    return ResultTable(cols, rows, spec.metadata())


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Evaluate every grid point; rows follow the axis order regardless of ``workers``."""
    if spec.kind in FIDELITY_KINDS:
        return _fidelity_table(spec)
    return _key_rate_table(spec)


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def format_csv(table: ResultTable) -> str:
    lines = [f"# {k}={v}" for k, v in table.metadata.items()]
    lines.append(",".join(table.columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def emit_csv(table: ResultTable, path) -> None:
    text = format_csv(table)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def parse_csv(lines: Iterable[str]) -> ResultTable:
    meta: dict[str, str] = {}
    columns: tuple[str, ...] | None = None
    rows = []
    for line in lines:
        line = line.rstrip("\n")
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif columns is None:
            columns = tuple(line.split(","))
        elif line:
            rows.append(tuple(float(v) for v in line.split(",")))
    return ResultTable(columns or (), rows, meta)


def read_csv(path) -> ResultTable:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh)
