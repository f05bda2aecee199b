"""Load, cleanse and split substation monitoring data."""
from .calendar import N_CALENDAR, calendar_features
from .cleanse import (
    N_CUSTOMER_BINS,
    Discard,
    DiscardReport,
    aggregate_phases,
    bin_customers,
    build_days,
    cleanse,
)
from .records import (
    SLOTS_PER_DAY,
    DayProfile,
    RawMeasurement,
    Reject,
    SchemaError,
    SubstationMeta,
    parse_metadata_csv,
    parse_monitoring_csv,
)
from .split import ChannelScaler, DatasetSplit, DegenerateScaleError, fit_scaler, split_train_test
from .weather import (
    HttpWeatherClient,
    WeatherDay,
    WeatherGap,
    WeatherRetrievalError,
    fetch_weather,
)

__all__ = [
    "N_CALENDAR",
    "N_CUSTOMER_BINS",
    "SLOTS_PER_DAY",
    "ChannelScaler",
    "DatasetSplit",
    "DayProfile",
    "DegenerateScaleError",
    "Discard",
    "DiscardReport",
    "HttpWeatherClient",
    "RawMeasurement",
    "Reject",
    "SchemaError",
    "SubstationMeta",
    "WeatherDay",
    "WeatherGap",
    "WeatherRetrievalError",
    "aggregate_phases",
    "bin_customers",
    "build_days",
    "calendar_features",
    "cleanse",
    "fetch_weather",
    "fit_scaler",
    "parse_metadata_csv",
    "parse_monitoring_csv",
    "split_train_test",
]
