from .parallel import ParallelMap, serial_map
from .rng import derive_key, stream
