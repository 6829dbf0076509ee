"""Event-camera shot-noise injection, denoising filters and event representations."""
from .events import (
    Event,
    EventStream,
    Label,
    LabeledStream,
    SensorGeometry,
    ValidationReport,
    WindowSpec,
    merge,
    slice_window,
    validate,
)
from .evaluation import ConfusionReport, ThroughputReport, confusion, stream_stats, throughput_bench
from .filters import DIFFilter, NNFilter, dif_filter, nn_filter, sweep
from .noise import (
    DEFAULT_LEVELS,
    LevelSet,
    NoiseInjector,
    NoiseSpec,
    compute_time_step,
    draw_noise_level,
    generate_noise,
    generate_signal_bar,
    inject_noise,
    mix_recorded_noise,
    pixel_probability,
)
from .representations import (
    EventCountImage,
    EventSpikeTensor,
    RandomEventTransform,
    VoxelGraph,
    VoxelGraphBuilder,
    VoxelGrid,
    crop,
    event_count_image,
    event_spike_tensor,
    hflip,
    random_transform_policy,
    translate,
    voxel_graph,
    voxel_grid,
)

__version__ = "0.1.0"
