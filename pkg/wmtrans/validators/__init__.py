from .config_validator import ConfigValidator
from .length_validator import LengthBoundsValidator, filter_by_length_bounds, filter_records_by_length_bounds
