"""Residential scenario generation (base consumption interval, randomized
per-consumer bounds, peak-segmented prices) and versioned persistence.

The canonical recipe: 24 hourly slots starting at 8 AM, off-peak hours
12 AM-7 AM, mid-peak 7 AM-4 PM and 10 PM-12 AM, on-peak 4 PM-10 PM, with
price coefficients 0.003/0.004/0.005 per segment, exponent 1.2, offset 0.
Initial consumption is drawn between each consumer's jittered low and upper
limit curves, and the energy budget is the sum of that initial draw, so every
generated spec is feasible by construction.
"""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import numpy as np

from .algorithms import Scenario
from .feasible import ConsumerSpec
from .model import PriceCurve, _as_1d

OFF_PEAK = "off-peak"
MID_PEAK = "mid-peak"
ON_PEAK = "on-peak"

#: canonical per-segment price coefficients a_h
SEGMENT_PRICES = {OFF_PEAK: 0.003, MID_PEAK: 0.004, ON_PEAK: 0.005}
CANONICAL_EXPONENT = 1.2

SCHEMA_VERSION = 1


class ScenarioFormatError(ValueError):
    """A scenario or base-interval file failed to parse or validate."""


@dataclass(frozen=True)
class BaseInterval:
    """Representative residential low/upper consumption limits per slot."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = _as_1d(self.low, "low")
        high = _as_1d(self.high, "high")
        if low.shape != high.shape:
            raise ValueError("low and high curves must have equal length")
        if np.any(low < 0):
            raise ValueError("low limits must be nonnegative")
        if np.any(low > high):
            raise ValueError("low limit exceeds upper limit")
        for arr, name in ((low, "low"), (high, "high")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.low.shape[0]


def default_base_interval() -> BaseInterval:
    """The 24-slot base interval shipped with the package (hand-digitized,
    representative only; override with any CSV of the same shape)."""
    path = resources.files("dsmgame.data").joinpath("base_interval.csv")
    with resources.as_file(path) as fname:
        return load_base_interval(fname)


def load_base_interval(path) -> BaseInterval:
    """Read the "slot,low,high" CSV; slots must run 1..H in order."""
    lows, highs = [], []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "slot,low,high":
        raise ScenarioFormatError(f"{path}:1: expected header 'slot,low,high'")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ScenarioFormatError(f"{path}:{lineno}: expected 3 fields")
        try:
            slot, low, high = int(parts[0]), float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ScenarioFormatError(f"{path}:{lineno}: {exc}") from exc
        if slot != len(lows) + 1:
            raise ScenarioFormatError(
                f"{path}:{lineno}: slot {slot} out of order (expected {len(lows) + 1})"
            )
        lows.append(low)
        highs.append(high)
    if not lows:
        raise ScenarioFormatError(f"{path}: no slots found")
    try:
        return BaseInterval(np.array(lows), np.array(highs))
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc


def classify_segments(horizon: int, clock_offset: int = 8) -> tuple[str, ...]:
    """Per-slot segment labels for the canonical 24-hour day.

    Slot 1 starts at `clock_offset` o'clock. Horizons other than 24 need an
    explicit segment map on the recipe instead.
    """
    if horizon != 24:
        raise ValueError(
            f"no canonical segment map for horizon {horizon}; pass explicit segments"
        )
    labels = []
    for slot in range(horizon):
        hour = (clock_offset + slot) % 24
        if 0 <= hour < 7:
            labels.append(OFF_PEAK)
        elif 16 <= hour < 22:
            labels.append(ON_PEAK)
        else:
            labels.append(MID_PEAK)
    return tuple(labels)


@dataclass(frozen=True)
class GenerationRecipe:
    """Knobs of the scenario generator; defaults reproduce the canonical
    residential setup at desk scale."""

    n_consumers: int = 50
    horizon: int = 24
    seed: int = 7
    jitter: float = 0.1
    offpeak_qmax_range: tuple[float, float] = (0.4, 0.6)
    clock_offset: int = 8
    segments: tuple[str, ...] | None = None
    segment_prices: dict[str, float] = field(
        default_factory=lambda: dict(SEGMENT_PRICES)
    )
    price_exponent: float = CANONICAL_EXPONENT
    price_offset: float = 0.0

    def __post_init__(self):
        if self.n_consumers < 1:
            raise ValueError("need at least one consumer")
        if self.jitter < 0:
            raise ValueError("jitter must be nonnegative")
        lo, hi = self.offpeak_qmax_range
        if not 0 <= lo <= hi:
            raise ValueError("off-peak q_max range must satisfy 0 <= lo <= hi")
        if self.segments is not None:
            if len(self.segments) != self.horizon:
                raise ValueError("segment map length must equal the horizon")
            unknown = set(self.segments) - set(self.segment_prices)
            if unknown:
                raise ValueError(f"segments without a price coefficient: {unknown}")

    def segment_labels(self) -> tuple[str, ...]:
        if self.segments is not None:
            return self.segments
        return classify_segments(self.horizon, self.clock_offset)

    def price_curve(self) -> PriceCurve:
        labels = self.segment_labels()
        a = np.array([self.segment_prices[lab] for lab in labels])
        b = np.full(self.horizon, self.price_exponent)
        c = np.full(self.horizon, self.price_offset)
        return PriceCurve(a, b, c)


def generate(
    recipe: GenerationRecipe, base: BaseInterval | None = None
) -> tuple[Scenario, np.ndarray]:
    """Draw a scenario plus its initial profiles, deterministically per seed.

    Per consumer: a uniform [0, jitter] offset is added independently to the
    low and upper limit curves; q_min is the jittered low curve; q_max is the
    maximum of the jittered upper curve on mid/on-peak slots and a uniform
    off-peak draw elsewhere; the initial point is drawn between the jittered
    limit curves (clipped into the bounds), and its sum becomes the budget.
    """
    if base is None:
        base = default_base_interval()
    if base.horizon != recipe.horizon:
        raise ValueError(
            f"base interval has {base.horizon} slots, recipe expects {recipe.horizon}"
        )
    labels = np.array(recipe.segment_labels())
    off_mask = labels == OFF_PEAK
    rng = np.random.default_rng(recipe.seed)
    specs = []
    initials = np.empty((recipe.n_consumers, recipe.horizon))
    lo_off, hi_off = recipe.offpeak_qmax_range
    for n in range(recipe.n_consumers):
        low = base.low + rng.uniform(0.0, recipe.jitter, recipe.horizon)
        high = base.high + rng.uniform(0.0, recipe.jitter, recipe.horizon)
        high = np.maximum(high, low)
        q_max = np.full(recipe.horizon, high.max())
        q_max[off_mask] = rng.uniform(lo_off, hi_off, int(off_mask.sum()))
        q_min = np.minimum(low, q_max)
        init = np.clip(rng.uniform(low, high), q_min, q_max)
        specs.append(ConsumerSpec(q_min, q_max, float(init.sum())))
        initials[n] = init
    return Scenario(tuple(specs), recipe.price_curve()), initials


# --- persistence -----------------------------------------------------------

_TOP_FIELDS = {"schema_version", "horizon", "price", "consumers", "initial_profiles"}
_PRICE_FIELDS = {"a", "b", "c"}
_CONSUMER_FIELDS = {"q_min", "q_max", "energy"}


class LoadedScenario(NamedTuple):
    scenario: Scenario
    initial_profiles: np.ndarray | None
    content_hash: str


def scenario_payload(scenario: Scenario, initial_profiles=None) -> dict:
    """JSON-ready dict for a scenario (plus optional initial profiles)."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "horizon": scenario.horizon,
        "price": {
            "a": scenario.curve.a.tolist(),
            "b": scenario.curve.b.tolist(),
            "c": scenario.curve.c.tolist(),
        },
        "consumers": [
            {
                "q_min": spec.q_min.tolist(),
                "q_max": spec.q_max.tolist(),
                "energy": spec.energy,
            }
            for spec in scenario.specs
        ],
    }
    if initial_profiles is not None:
        payload["initial_profiles"] = np.asarray(initial_profiles).tolist()
    return payload


def payload_hash(payload: dict) -> str:
    """Content hash of the canonical (sorted, compact) JSON encoding."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_scenario(path, scenario: Scenario, initial_profiles=None) -> str:
    """Write the scenario JSON; returns its content hash."""
    payload = scenario_payload(scenario, initial_profiles)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return payload_hash(payload)


def _reject_unknown(fields: dict, allowed: set, where: str) -> None:
    unknown = set(fields) - allowed
    if unknown:
        raise ScenarioFormatError(
            f"{where}: unknown field(s) {sorted(unknown)} (strict schema)"
        )


def load_scenario(path) -> LoadedScenario:
    """Read a scenario JSON file; strict schema, round-trip exact."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ScenarioFormatError(f"{path}: top level must be an object")
    _reject_unknown(payload, _TOP_FIELDS, f"{path}")
    for name in ("schema_version", "horizon", "price", "consumers"):
        if name not in payload:
            raise ScenarioFormatError(f"{path}: missing field {name!r}")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise ScenarioFormatError(
            f"{path}: unsupported schema_version {payload['schema_version']!r}"
        )
    _reject_unknown(payload["price"], _PRICE_FIELDS, f"{path}: price")
    try:
        curve = PriceCurve(
            np.array(payload["price"]["a"], dtype=float),
            np.array(payload["price"]["b"], dtype=float),
            np.array(payload["price"]["c"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{path}: price: {exc}") from exc
    horizon = payload["horizon"]
    if curve.horizon != horizon:
        raise ScenarioFormatError(
            f"{path}: price arrays have length {curve.horizon}, horizon says {horizon}"
        )
    specs = []
    for idx, entry in enumerate(payload["consumers"]):
        if not isinstance(entry, dict):
            raise ScenarioFormatError(f"{path}: consumers[{idx}] must be an object")
        _reject_unknown(entry, _CONSUMER_FIELDS, f"{path}: consumers[{idx}]")
        try:
            specs.append(
                ConsumerSpec(
                    np.array(entry["q_min"], dtype=float),
                    np.array(entry["q_max"], dtype=float),
                    float(entry["energy"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioFormatError(f"{path}: consumers[{idx}]: {exc}") from exc
    try:
        scenario = Scenario(tuple(specs), curve)
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    initials = None
    if "initial_profiles" in payload:
        try:
            initials = np.array(payload["initial_profiles"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ScenarioFormatError(f"{path}: initial_profiles: {exc}") from exc
        if initials.shape != (scenario.n_consumers, horizon):
            raise ScenarioFormatError(
                f"{path}: initial_profiles must be {scenario.n_consumers} x {horizon}"
            )
    return LoadedScenario(scenario, initials, payload_hash(payload))
