"""Ingestion, preprocessing and post-generation repair of flight tables."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import schema as S
from .errors import EmptyFile, MissingColumn, ParseFailure, SingleClassInput, ValidationError

log = logging.getLogger(__name__)

DELAY_THRESHOLD_MIN = 15.0
_EPOCH_DAY_MIN = 1440


# ---------------------------------------------------------------------------
# CSV boundary


def minutes_to_iso(minutes) -> list[str]:
    arr = np.asarray(minutes, dtype="int64").astype("datetime64[m]").astype("datetime64[s]")
    return [s + "Z" for s in np.datetime_as_string(arr, unit="s")]


def iso_to_minutes(values) -> np.ndarray:
    """Parse ISO-8601 strings to float epoch minutes (NaN for blanks)."""
    ts = pd.to_datetime(pd.Series(values, dtype="object"), utc=True, errors="raise", format="ISO8601")
    out = np.full(len(ts), np.nan)
    ok = ts.notna().to_numpy()
    out[ok] = ts[ok].astype("int64").to_numpy() // 60_000_000_000
    return out


def _format_cell(value, col: S.ColumnSchema) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if col.kind == S.DATETIME:
        return minutes_to_iso([int(value)])[0]
    if col.kind == S.BOOLEAN:
        return "true" if bool(value) else "false"
    if col.kind == S.NUMERIC:
        return repr(float(value))
    if col.integer:
        return str(int(value))
    return str(value)


def write_csv(table: pd.DataFrame, path, schema=None) -> None:
    """Write ``table`` with canonical headers; atomic (temp file + rename)."""
    path = Path(path)
    text = to_csv_text(table, schema)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="")
    os.replace(tmp, path)


def to_csv_text(table: pd.DataFrame, schema=None) -> str:
    cols = list(schema) if schema is not None else list(S.infer_schema(table))
    cols = [c for c in cols if c.name in table.columns]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([c.name for c in cols])
    rendered = []
    for c in cols:
        values = table[c.name].tolist()
        if c.kind == S.DATETIME:
            cells = [""] * len(values)
            idx = [i for i, v in enumerate(values) if v is not None and not _isnan(v)]
            if idx:
                for i, s in zip(idx, minutes_to_iso([int(values[i]) for i in idx])):
                    cells[i] = s
        else:
            cells = [_format_cell(v, c) for v in values]
        rendered.append(cells)
    for row in zip(*rendered):
        writer.writerow(row)
    return buf.getvalue()


def _isnan(v) -> bool:
    return isinstance(v, float) and math.isnan(v)


def _parse_bool(s: str):
    s = s.strip().lower()
    if s in ("true", "1", "1.0", "t", "yes"):
        return True
    if s in ("false", "0", "0.0", "f", "no"):
        return False
    raise ValueError(s)


def _parse_column(raw: pd.Series, col: S.ColumnSchema):
    """Return (values, bad_mask). Blank cells are missing, not failures."""
    text = raw.astype(str).str.strip()
    blank = (text == "").to_numpy()
    bad = np.zeros(len(text), dtype=bool)
    if col.kind == S.NUMERIC:
        num = pd.to_numeric(text.where(~blank, None), errors="coerce").to_numpy(dtype=float)
        bad = np.isnan(num) & ~blank
        return num, bad
    if col.kind == S.DATETIME:
        ts = pd.to_datetime(text.where(~blank, None), utc=True, errors="coerce", format="ISO8601")
        ok = ts.notna().to_numpy()
        out = np.full(len(text), np.nan)
        out[ok] = ts[ok].astype("int64").to_numpy() // 60_000_000_000
        return out, ~ok & ~blank
    if col.kind == S.BOOLEAN:
        out = np.empty(len(text), dtype=object)
        for i, s in enumerate(text):
            if blank[i]:
                out[i] = None
                continue
            try:
                out[i] = _parse_bool(s)
            except ValueError:
                bad[i] = True
        return out, bad
    out = np.empty(len(text), dtype=object)
    if col.integer:
        num = pd.to_numeric(text.where(~blank, None), errors="coerce").to_numpy(dtype=float)
        bad = (np.isnan(num) | (num != np.round(num))) & ~blank
        for i in np.flatnonzero(~blank & ~bad):
            out[i] = int(num[i])
        return out, bad
    for i, s in enumerate(text):
        if blank[i]:
            out[i] = None
        elif col.integer:
            try:
                out[i] = int(float(s))
            except ValueError:
                bad[i] = True
        else:
            out[i] = s
    return out, bad


def load_mapping(path) -> dict[str, str]:
    """Read a TOML header mapping: ``[columns]`` table of local = canonical."""
    import tomli

    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    return dict(doc.get("columns", doc))


def load_csv(path, mapping=None, schema=None, optional=(), strict=False) -> pd.DataFrame:
    """Load a CSV into a schema-typed table.

    Headers are translated through ``mapping`` (local -> canonical) first.
    With ``schema=None`` every header must be a known canonical column.
    Rows with unparseable cells are dropped; their count is stored in
    ``table.attrs["parse_failures"]``. ``strict=True`` raises instead.
    """
    path = Path(path)
    raw_text = path.read_text(encoding="utf-8-sig")
    if not raw_text.strip():
        raise EmptyFile(f"{path} is empty")
    frame = pd.read_csv(io.StringIO(raw_text), dtype=str, keep_default_na=False)
    if mapping:
        frame = frame.rename(columns=mapping)
    known = S.by_name(S.RAW_SCHEMA)
    if schema is None:
        unknown = [c for c in frame.columns if c not in known]
        if unknown:
            raise MissingColumn(unknown[0])
        cols = [c for c in S.RAW_SCHEMA if c.name in frame.columns]
    else:
        cols = list(schema)
        for c in cols:
            if c.name not in frame.columns and c.name not in optional:
                raise MissingColumn(c.name)
        cols = [c for c in cols if c.name in frame.columns]

    parsed = {}
    bad_rows = np.zeros(len(frame), dtype=bool)
    for c in cols:
        values, bad = _parse_column(frame[c.name], c)
        if strict and bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ParseFailure(i + 2, c.name, frame[c.name].iloc[i])
        bad_rows |= bad
        parsed[c.name] = values
    table = pd.DataFrame(parsed, columns=[c.name for c in cols])
    table = _coerce(table.loc[~bad_rows].reset_index(drop=True), cols)
    n_bad = int(bad_rows.sum())
    if n_bad:
        log.warning("%s: dropped %d unparseable rows", path, n_bad)
    table.attrs["parse_failures"] = n_bad
    return table


def _coerce(table: pd.DataFrame, cols) -> pd.DataFrame:
    """Give each column its canonical dtype where no cells are missing."""
    for c in cols:
        s = table[c.name]
        if c.kind == S.DATETIME:
            if s.notna().all():
                table[c.name] = s.astype("int64")
            else:
                table[c.name] = s.astype(float)
        elif c.kind == S.NUMERIC:
            table[c.name] = s.astype(float)
        elif c.kind == S.BOOLEAN and s.notna().all():
            table[c.name] = s.astype(bool)
        elif c.integer and s.notna().all():
            table[c.name] = s.astype("int64")
    return table


# ---------------------------------------------------------------------------
# preprocessing


@dataclass
class FlightCorpus:
    full: pd.DataFrame
    diversions: pd.DataFrame
    route_set: frozenset
    airport_lookup: dict
    route_distance: dict
    dropped: dict = field(default_factory=dict)


def _calendar(minutes) -> tuple[np.ndarray, np.ndarray]:
    """Quarter (1-4) and ISO day of week (Mon=1 .. Sun=7)."""
    m = np.asarray(minutes, dtype="int64")
    days = np.floor_divide(m, _EPOCH_DAY_MIN)
    dow = (days + 3) % 7 + 1  # 1970-01-01 was a Thursday
    month = m.astype("datetime64[m]").astype("datetime64[M]").astype("int64") % 12
    quarter = month // 3 + 1
    return quarter.astype("int64"), dow.astype("int64")


def preprocess(raw: pd.DataFrame) -> FlightCorpus:
    """Impute diverted-flight durations, derive delta/label columns and build
    the route and airport lookups."""
    for name in S.FLIGHT_COLUMNS:
        if name not in raw.columns and name not in (
            S.ACTUAL_ELAPSED, S.AIR_TIME, S.WHEELS_ON, S.ACTUAL_ARR, S.ARR_DELTA,
            S.DEP_DELTA, S.DEP_DELAY_LABEL, S.ARR_DELAY_LABEL, S.QUARTER, S.DAY_OF_WEEK,
            S.WHEELS_OFF, S.SCHED_ARR,
        ):
            raise MissingColumn(name)
    df = raw.copy()
    for name in S.FLIGHT_COLUMNS:
        if name not in df.columns:
            df[name] = np.nan
    dropped = {"missing_imputation_source": 0, "negative_air_time": 0}

    div = df[S.DIVERSION].astype(bool).to_numpy()
    df[S.DIVERSION] = div
    num = lambda c: df[c].astype(float).to_numpy().copy()  # noqa: E731

    elapsed = num(S.ACTUAL_ELAPSED)
    air = num(S.AIR_TIME)
    taxi_out = num(S.TAXI_OUT)
    taxi_in = num(S.TAXI_IN)
    if div.any():
        if S.DIV_ACTUAL_ELAPSED not in df.columns:
            raise MissingColumn(S.DIV_ACTUAL_ELAPSED)
        src = num(S.DIV_ACTUAL_ELAPSED)
        missing = div & np.isnan(src)
        dropped["missing_imputation_source"] = int(missing.sum())
        elapsed[div] = src[div]
        air[div] = elapsed[div] - taxi_in[div] - taxi_out[div]
    bad_air = ~(air > 0)
    bad_air &= ~(div & np.isnan(elapsed))
    dropped["negative_air_time"] = int(bad_air.sum())
    keep = ~(bad_air | (div & np.isnan(elapsed)))
    if (~keep).any():
        log.warning("preprocess dropped rows: %s", dropped)
    df[S.ACTUAL_ELAPSED] = elapsed
    df[S.AIR_TIME] = air
    df = df.loc[keep].reset_index(drop=True)
    div = div[keep]

    num = lambda c: df[c].astype(float).to_numpy().copy()  # noqa: E731
    sched_dep = num(S.SCHED_DEP)
    act_dep = num(S.ACTUAL_DEP)
    df[S.DEP_DELTA] = act_dep - sched_dep

    wheels_off = num(S.WHEELS_OFF)
    fill = np.isnan(wheels_off)
    wheels_off[fill] = act_dep[fill] + num(S.TAXI_OUT)[fill]
    wheels_on = num(S.WHEELS_ON)
    fill = np.isnan(wheels_on)
    wheels_on[fill] = wheels_off[fill] + num(S.AIR_TIME)[fill]
    sched_arr = num(S.SCHED_ARR)
    fill = np.isnan(sched_arr)
    sched_arr[fill] = sched_dep[fill] + num(S.SCHED_ELAPSED)[fill]
    act_arr = num(S.ACTUAL_ARR)
    fill = np.isnan(act_arr)
    act_arr[fill] = act_dep[fill] + num(S.ACTUAL_ELAPSED)[fill]
    df[S.WHEELS_OFF] = wheels_off
    df[S.WHEELS_ON] = wheels_on
    df[S.SCHED_ARR] = sched_arr
    df[S.ACTUAL_ARR] = act_arr
    df[S.ARR_DELTA] = act_arr - sched_arr
    df[S.DEP_DELAY_LABEL] = df[S.DEP_DELTA].to_numpy() > DELAY_THRESHOLD_MIN
    df[S.ARR_DELAY_LABEL] = df[S.ARR_DELTA].to_numpy() > DELAY_THRESHOLD_MIN
    quarter, dow = _calendar(sched_dep)
    for name, derived in ((S.QUARTER, quarter), (S.DAY_OF_WEEK, dow)):
        have = df[name]
        df[name] = np.where(have.isna().to_numpy(), derived, have.fillna(0).to_numpy()).astype("int64")

    full = _coerce(df[S.FLIGHT_COLUMNS].copy(), S.FLIGHT_SCHEMA)

    lookup = {}
    for id_col, icao, city, st, stname in (
        (S.ORIGIN_ID, S.ORIGIN_ICAO, S.ORIGIN_CITY, S.ORIGIN_STATE, S.ORIGIN_STATE_NAME),
        (S.DEST_ID, S.DEST_ICAO, S.DEST_CITY, S.DEST_STATE, S.DEST_STATE_NAME),
    ):
        for row in full[[id_col, icao, city, st, stname]].itertuples(index=False):
            lookup.setdefault(int(row[0]), tuple(row[1:]))
    lookup = dict(sorted(lookup.items()))

    routes = list(zip(full[S.ORIGIN_ID].astype(int), full[S.DEST_ID].astype(int)))
    route_set = frozenset(r for r in routes if r[0] != r[1])
    dist = pd.DataFrame({"r": routes, "d": full[S.DISTANCE].to_numpy()})
    route_distance = {
        r: float(d) for r, d in sorted(dist.groupby("r")["d"].median().items())
    }

    diversions = full.loc[full[S.DIVERSION], S.GENERATION_COLUMNS].reset_index(drop=True)
    return FlightCorpus(full, diversions, route_set, lookup, route_distance, dropped)


# ---------------------------------------------------------------------------
# post-generation repair


def reconstruct_relational(synthetic: pd.DataFrame, corpus: FlightCorpus) -> pd.DataFrame:
    """Derive the 17 relational columns from the 14 generated ones.

    Rows with an airport id missing from the lookup get empty airport fields
    and an empty distance; they never survive route rejection.
    """
    missing = [c for c in S.GENERATION_COLUMNS if c not in synthetic.columns]
    if missing:
        raise MissingColumn(missing[0])
    out = synthetic[S.GENERATION_COLUMNS].reset_index(drop=True).copy()
    n = len(out)
    origin = out[S.ORIGIN_ID].astype("int64").to_numpy()
    dest = out[S.DEST_ID].astype("int64").to_numpy()
    blank = (None, None, None, None)
    for ids, cols in (
        (origin, (S.ORIGIN_ICAO, S.ORIGIN_CITY, S.ORIGIN_STATE, S.ORIGIN_STATE_NAME)),
        (dest, (S.DEST_ICAO, S.DEST_CITY, S.DEST_STATE, S.DEST_STATE_NAME)),
    ):
        rows = [corpus.airport_lookup.get(int(i), blank) for i in ids]
        for j, name in enumerate(cols):
            out[name] = pd.Series([r[j] for r in rows], dtype=object)
    unknown = sum(
        1 for o, d in zip(origin, dest)
        if int(o) not in corpus.airport_lookup or int(d) not in corpus.airport_lookup
    )
    out.attrs["unknown_airport_rows"] = unknown

    f = lambda c: out[c].astype(float).to_numpy()  # noqa: E731
    sched_dep = out[S.SCHED_DEP].astype("int64").to_numpy()
    act_dep = out[S.ACTUAL_DEP].astype("int64").to_numpy()
    quarter, dow = _calendar(sched_dep) if n else (np.zeros(0, "int64"), np.zeros(0, "int64"))
    out[S.QUARTER] = quarter
    out[S.DAY_OF_WEEK] = dow
    wheels_off = act_dep + np.rint(f(S.TAXI_OUT)).astype("int64")
    out[S.WHEELS_OFF] = wheels_off
    out[S.WHEELS_ON] = wheels_off + np.rint(f(S.AIR_TIME)).astype("int64")
    out[S.SCHED_ARR] = sched_dep + np.rint(f(S.SCHED_ELAPSED)).astype("int64")
    out[S.ACTUAL_ARR] = act_dep + np.rint(f(S.ACTUAL_ELAPSED)).astype("int64")
    out[S.DEP_DELAY_LABEL] = f(S.DEP_DELTA) > DELAY_THRESHOLD_MIN
    out[S.ARR_DELAY_LABEL] = f(S.ARR_DELTA) > DELAY_THRESHOLD_MIN
    out[S.DISTANCE] = np.array(
        [corpus.route_distance.get((int(o), int(d)), np.nan) for o, d in zip(origin, dest)],
        dtype=float,
    )
    arrival_gap = np.abs(f(S.ARR_DELTA) - (out[S.ACTUAL_ARR] - out[S.SCHED_ARR]).to_numpy())
    out.attrs["arrival_delta_discrepancy_mean"] = float(arrival_gap.mean()) if n else 0.0
    return out[S.FLIGHT_COLUMNS]


def route_keys(table: pd.DataFrame) -> list:
    o = table[S.ORIGIN_ID].tolist()
    d = table[S.DEST_ID].tolist()
    return [
        None if (a is None or b is None or _isnan(a) or _isnan(b)) else (int(a), int(b))
        for a, b in zip(o, d)
    ]


def valid_route_mask(table: pd.DataFrame, route_set) -> np.ndarray:
    return np.array([k is not None and k in route_set for k in route_keys(table)], dtype=bool)


def reject_invalid_routes(synthetic: pd.DataFrame, route_set) -> tuple[pd.DataFrame, int]:
    """Drop rows whose origin-destination pair was never observed."""
    mask = valid_route_mask(synthetic, route_set)
    kept = synthetic.loc[mask].reset_index(drop=True)
    return kept, int((~mask).sum())


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_stratified(table: pd.DataFrame, target: str, test_fraction: float, seed) -> tuple[pd.DataFrame, pd.DataFrame]:
    if not 0 < test_fraction < 1:
        raise ValidationError("test_fraction must be in (0, 1)")
    y = table[target].astype(bool).to_numpy()
    if y.all() or not y.any():
        raise SingleClassInput(f"{target!r} has a single class")
    rng = np.random.default_rng(seed)
    test_idx = []
    for cls in (True, False):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        test_idx.append(idx[: _half_up(len(idx) * test_fraction)])
    test_mask = np.zeros(len(y), dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    return (
        table.loc[~test_mask].reset_index(drop=True),
        table.loc[test_mask].reset_index(drop=True),
    )


# ---------------------------------------------------------------------------
# desk-scale fixture

# id, ICAO, city, state code, state name, lat, lon
FIXTURE_AIRPORTS = (
    (10397, "KATL", "Atlanta, GA", "GA", "Georgia", 33.64, -84.43),
    (11298, "KDFW", "Dallas/Fort Worth, TX", "TX", "Texas", 32.90, -97.04),
    (11292, "KDEN", "Denver, CO", "CO", "Colorado", 39.86, -104.67),
    (13930, "KORD", "Chicago, IL", "IL", "Illinois", 41.98, -87.90),
    (12892, "KLAX", "Los Angeles, CA", "CA", "California", 33.94, -118.41),
    (14747, "KSEA", "Seattle, WA", "WA", "Washington", 47.45, -122.31),
    (12478, "KJFK", "New York, NY", "NY", "New York", 40.64, -73.78),
    (14107, "KPHX", "Phoenix, AZ", "AZ", "Arizona", 33.43, -112.01),
    (13204, "KMCO", "Orlando, FL", "FL", "Florida", 28.43, -81.31),
    (11433, "KDTW", "Detroit, MI", "MI", "Michigan", 42.21, -83.35),
)
FIXTURE_CARRIERS = ("AA", "DL", "UA", "WN", "B6")
_YEAR_START_MIN = 27_875_520  # 2023-01-01T00:00Z


def fixture_routes() -> list[tuple[int, int]]:
    """Each airport paired with its successor, in both directions (20 routes)."""
    ids = [a[0] for a in FIXTURE_AIRPORTS]
    out = []
    for i in range(len(ids)):
        j = (i + 1) % len(ids)
        out += [(ids[i], ids[j]), (ids[j], ids[i])]
    return out


def _haversine_miles(a, b) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a[5], a[6], b[5], b[6]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * 3958.8 * math.asin(math.sqrt(h))


# diverted-row distributions: taxi-out (mean, sd), departure delta (shift, exp scale)
FIXTURE_SIGNAL = {"taxi_out": (23.0, 8.0), "dep_delta": (0.0, 30.0)}


def generate_fixture_corpus(seed, n_rows: int, rare_rate: float) -> pd.DataFrame:
    """Deterministic raw corpus in the BTS layout (31 columns plus the
    diversion-specific attributes).

    Diverted rows run longer taxi-out times and later departures than
    regular flights; every other column is independent of the label.
    """
    if n_rows < 100:
        raise ValidationError("n_rows must be >= 100")
    if not 0 < rare_rate <= 0.5:
        raise ValidationError("rare_rate must be in (0, 0.5]")
    rng = np.random.default_rng(seed)
    airports = {a[0]: a for a in FIXTURE_AIRPORTS}
    routes = fixture_routes()
    route_miles = [round(_haversine_miles(airports[o], airports[d])) for o, d in routes]

    n_pos = int(math.floor(n_rows * rare_rate))
    div = np.zeros(n_rows, dtype=bool)
    div[rng.choice(n_rows, size=n_pos, replace=False)] = True

    r = rng.integers(0, len(routes), n_rows)
    origin = np.array([routes[i][0] for i in r])
    dest = np.array([routes[i][1] for i in r])
    distance = np.array([route_miles[i] for i in r], dtype=float)
    carrier_idx = rng.choice(len(FIXTURE_CARRIERS), n_rows, p=[0.3, 0.25, 0.2, 0.15, 0.1])
    carrier = np.array(FIXTURE_CARRIERS)[carrier_idx]
    tail = np.array([f"N{100 + rng.integers(0, 8)}{c}" for c in carrier])

    sched_dep = _YEAR_START_MIN + 5 * rng.integers(0, 365 * 288, n_rows)
    sched_elapsed = np.rint(distance / 7.5 + 35 + rng.normal(0, 5, n_rows))
    taxi_in = np.clip(np.rint(rng.gamma(3.0, 2.5, n_rows)), 2, 60)

    taxi_out = np.clip(np.rint(rng.gamma(4.0, 4.0, n_rows)), 3, 90)
    dep_delta = np.rint(-8 + rng.exponential(18.0, n_rows))
    k = int(div.sum())
    taxi_out[div] = np.clip(np.rint(rng.normal(*FIXTURE_SIGNAL["taxi_out"], k)), 5, 120)
    shift, scale = FIXTURE_SIGNAL["dep_delta"]
    dep_delta[div] = np.rint(shift + rng.exponential(scale, k))

    act_dep = sched_dep + dep_delta.astype("int64")
    wheels_off = act_dep + taxi_out.astype("int64")
    floor = taxi_out + taxi_in + 20
    elapsed = np.maximum(np.rint(sched_elapsed + rng.normal(-3, 8, n_rows)), floor)
    div_elapsed = np.maximum(np.rint(sched_elapsed + rng.normal(70, 30, n_rows)), floor)
    air = elapsed - taxi_out - taxi_in
    wheels_on = wheels_off + air.astype("int64")
    sched_arr = sched_dep + sched_elapsed.astype("int64")
    act_arr = act_dep + elapsed.astype("int64")
    arr_delta = (act_arr - sched_arr).astype(float)
    quarter, dow = _calendar(sched_dep)

    nan = np.nan
    frame = {
        S.CARRIER: carrier.astype(object),
        S.TAIL: tail.astype(object),
        S.ORIGIN_ID: origin,
        S.DEST_ID: dest,
        S.QUARTER: quarter,
        S.DAY_OF_WEEK: dow,
        S.SCHED_DEP: sched_dep,
        S.ACTUAL_DEP: act_dep,
        S.DEP_DELTA: dep_delta,
        S.DEP_DELAY_LABEL: dep_delta > DELAY_THRESHOLD_MIN,
        S.TAXI_OUT: taxi_out,
        S.WHEELS_OFF: wheels_off,
        S.WHEELS_ON: np.where(div, nan, wheels_on.astype(float)),
        S.TAXI_IN: taxi_in,
        S.SCHED_ARR: sched_arr,
        S.ACTUAL_ARR: np.where(div, nan, act_arr.astype(float)),
        S.ARR_DELTA: np.where(div, nan, arr_delta),
        S.ARR_DELAY_LABEL: np.where(div, None, arr_delta > DELAY_THRESHOLD_MIN).astype(object),
        S.SCHED_ELAPSED: sched_elapsed,
        S.ACTUAL_ELAPSED: np.where(div, nan, elapsed),
        S.AIR_TIME: np.where(div, nan, air),
        S.DISTANCE: distance,
        S.DIVERSION: div,
        S.DIV_ACTUAL_ELAPSED: np.where(div, div_elapsed, nan),
        S.DIV_DISTANCE: np.where(div, np.rint(distance * rng.uniform(0.3, 1.1, n_rows)), nan),
        S.DIV_AIRPORT_ID: np.where(div, rng.choice([a[0] for a in FIXTURE_AIRPORTS], n_rows), None).astype(object),
    }
    for prefix, ids in (("Origin", origin), ("Destination", dest)):
        looked = [airports[i] for i in ids]
        icao_col = S.ORIGIN_ICAO if prefix == "Origin" else S.DEST_ICAO
        frame[icao_col] = np.array([a[1] for a in looked], dtype=object)
        frame[f"{prefix} City"] = np.array([a[2] for a in looked], dtype=object)
        frame[f"{prefix} State Code"] = np.array([a[3] for a in looked], dtype=object)
        frame[f"{prefix} State Name"] = np.array([a[4] for a in looked], dtype=object)
    return pd.DataFrame(frame)[[c.name for c in S.RAW_SCHEMA]]


def load_corpus(path, mapping=None) -> FlightCorpus:
    raw = load_csv(path, mapping=mapping, schema=S.RAW_SCHEMA, optional=_OPTIONAL_RAW)
    return preprocess(raw)


_OPTIONAL_RAW = {
    S.ACTUAL_ELAPSED, S.AIR_TIME, S.WHEELS_ON, S.ACTUAL_ARR, S.ARR_DELTA, S.DEP_DELTA,
    S.DEP_DELAY_LABEL, S.ARR_DELAY_LABEL, S.QUARTER, S.DAY_OF_WEEK, S.WHEELS_OFF,
    S.SCHED_ARR, S.DIV_ACTUAL_ELAPSED, S.DIV_DISTANCE, S.DIV_AIRPORT_ID,
}
