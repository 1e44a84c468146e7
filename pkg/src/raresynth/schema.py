"""Column schema for the flight-record tables.

Every table in the pipeline is a :class:`pandas.DataFrame` whose columns follow
one of the schemas defined here. Cell conventions:

* ``numeric``  -> float64 (minutes or miles)
* ``datetime`` -> int64 UTC epoch minutes (ISO-8601 only at the CSV boundary)
* ``categorical`` -> str, or int when ``integer=True`` (airport ids, calendar codes)
* ``boolean``  -> bool
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

NUMERIC = "numeric"
CATEGORICAL = "categorical"
DATETIME = "datetime"
BOOLEAN = "boolean"
KINDS = (NUMERIC, CATEGORICAL, DATETIME, BOOLEAN)

GENERATED = "generated"
RELATIONAL = "relational"
TARGET = "target"
DROPPED = "dropped"
ROLES = (GENERATED, RELATIONAL, TARGET, DROPPED)


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    unit: Optional[str] = None
    role: str = GENERATED
    integer: bool = False
    predictive: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")
        if self.role not in ROLES:
            raise ValueError(f"unknown column role {self.role!r}")


# canonical names
CARRIER = "Unique Carrier Code"
TAIL = "Tail Number"
ORIGIN_ID = "Origin Airport ID"
ORIGIN_ICAO = "ICAO Origin Airport"
ORIGIN_CITY = "Origin City"
ORIGIN_STATE = "Origin State Code"
ORIGIN_STATE_NAME = "Origin State Name"
DEST_ID = "Destination Airport ID"
DEST_ICAO = "ICAO Destination Airport"
DEST_CITY = "Destination City"
DEST_STATE = "Destination State Code"
DEST_STATE_NAME = "Destination State Name"
QUARTER = "Quarter"
DAY_OF_WEEK = "Day of Week"
SCHED_DEP = "Scheduled Departure Time UTC"
ACTUAL_DEP = "Actual Departure Time UTC"
DEP_DELTA = "Departure ΔT (min)"
DEP_DELAY_LABEL = "Departure Delay Label"
TAXI_OUT = "Taxi Out Time (min)"
WHEELS_OFF = "Wheels Off Time UTC"
WHEELS_ON = "Wheels On Time UTC"
TAXI_IN = "Taxi In Time (min)"
SCHED_ARR = "Scheduled Arrival Time UTC"
ACTUAL_ARR = "Actual Arrival Time UTC"
ARR_DELTA = "Arrival ΔT (min)"
ARR_DELAY_LABEL = "Arrival Delay Label"
SCHED_ELAPSED = "Scheduled Elapsed Time (min)"
ACTUAL_ELAPSED = "Actual Elapsed Time (min)"
AIR_TIME = "Air Time (min)"
DISTANCE = "Distance (miles)"
DIVERSION = "Diversion Label"

DIV_ACTUAL_ELAPSED = "Diversion Actual Elapsed Time (min)"
DIV_DISTANCE = "Diversion Distance (miles)"
DIV_AIRPORT_ID = "Diversion Airport ID"


def _c(name, kind, unit=None, role=GENERATED, integer=False, predictive=False):
    return ColumnSchema(name, kind, unit, role, integer, predictive)


FLIGHT_SCHEMA: tuple[ColumnSchema, ...] = (
    _c(CARRIER, CATEGORICAL, predictive=True),
    _c(TAIL, CATEGORICAL, predictive=True),
    _c(ORIGIN_ID, CATEGORICAL, integer=True),
    _c(ORIGIN_ICAO, CATEGORICAL, role=RELATIONAL, predictive=True),
    _c(ORIGIN_CITY, CATEGORICAL, role=RELATIONAL),
    _c(ORIGIN_STATE, CATEGORICAL, role=RELATIONAL),
    _c(ORIGIN_STATE_NAME, CATEGORICAL, role=RELATIONAL),
    _c(DEST_ID, CATEGORICAL, integer=True),
    _c(DEST_ICAO, CATEGORICAL, role=RELATIONAL, predictive=True),
    _c(DEST_CITY, CATEGORICAL, role=RELATIONAL),
    _c(DEST_STATE, CATEGORICAL, role=RELATIONAL),
    _c(DEST_STATE_NAME, CATEGORICAL, role=RELATIONAL),
    _c(QUARTER, CATEGORICAL, role=RELATIONAL, integer=True, predictive=True),
    _c(DAY_OF_WEEK, CATEGORICAL, role=RELATIONAL, integer=True, predictive=True),
    _c(SCHED_DEP, DATETIME, predictive=True),
    _c(ACTUAL_DEP, DATETIME, predictive=True),
    _c(DEP_DELTA, NUMERIC, "minutes", predictive=True),
    _c(DEP_DELAY_LABEL, BOOLEAN, role=RELATIONAL),
    _c(TAXI_OUT, NUMERIC, "minutes", predictive=True),
    _c(WHEELS_OFF, DATETIME, role=RELATIONAL, predictive=True),
    _c(WHEELS_ON, DATETIME, role=RELATIONAL),
    _c(TAXI_IN, NUMERIC, "minutes"),
    _c(SCHED_ARR, DATETIME, role=RELATIONAL, predictive=True),
    _c(ACTUAL_ARR, DATETIME, role=RELATIONAL),
    _c(ARR_DELTA, NUMERIC, "minutes"),
    _c(ARR_DELAY_LABEL, BOOLEAN, role=RELATIONAL),
    _c(SCHED_ELAPSED, NUMERIC, "minutes", predictive=True),
    _c(ACTUAL_ELAPSED, NUMERIC, "minutes"),
    _c(AIR_TIME, NUMERIC, "minutes"),
    _c(DISTANCE, NUMERIC, "miles", role=RELATIONAL, predictive=True),
    _c(DIVERSION, BOOLEAN, role=TARGET),
)

# diversion-specific attributes present in raw extracts only
RAW_EXTRA: tuple[ColumnSchema, ...] = (
    _c(DIV_ACTUAL_ELAPSED, NUMERIC, "minutes", role=DROPPED),
    _c(DIV_DISTANCE, NUMERIC, "miles", role=DROPPED),
    _c(DIV_AIRPORT_ID, CATEGORICAL, role=DROPPED, integer=True),
)

RAW_SCHEMA: tuple[ColumnSchema, ...] = FLIGHT_SCHEMA + RAW_EXTRA

# columns the generative models see: generated features plus the target
GENERATION_SCHEMA: tuple[ColumnSchema, ...] = tuple(
    c for c in FLIGHT_SCHEMA if c.role in (GENERATED, TARGET)
)
GENERATION_COLUMNS = [c.name for c in GENERATION_SCHEMA]
RELATIONAL_COLUMNS = [c.name for c in FLIGHT_SCHEMA if c.role == RELATIONAL]
FLIGHT_COLUMNS = [c.name for c in FLIGHT_SCHEMA]
PREDICTION_COLUMNS = [c.name for c in FLIGHT_SCHEMA if c.predictive]


def by_name(schema=RAW_SCHEMA) -> dict[str, ColumnSchema]:
    return {c.name: c for c in schema}


def check_unique(schema) -> None:
    names = [c.name for c in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate column names in schema: {dupes}")


def subset(schema, names) -> tuple[ColumnSchema, ...]:
    lookup = by_name(schema)
    return tuple(lookup[n] for n in names)


def infer_schema(df) -> tuple[ColumnSchema, ...]:
    """Schema for an arbitrary frame: known flight columns keep their
    declared kind, anything else is typed from its dtype."""
    known = by_name(RAW_SCHEMA)
    out = []
    for name in df.columns:
        if name in known:
            out.append(known[name])
            continue
        dtype = df[name].dtype
        if dtype.kind == "b":
            kind = BOOLEAN
        elif dtype.kind in "fiu":
            kind = NUMERIC
        else:
            kind = CATEGORICAL
        out.append(ColumnSchema(name, kind))
    return tuple(out)


check_unique(RAW_SCHEMA)
