"""Seeded simulator of spiking working-memory networks whose synapses are
stochastic volatile two-state devices."""

from .device import (
    DEFAULT_SWITCH_TABLE,
    DeviceArray,
    DeviceParams,
    DeviceState,
    SwitchCdfParams,
    SwitchCdfTable,
    expire,
    on_pre_spike,
    p_on_burst,
    p_on_voltage,
    sample_retention,
    weight,
)
from .calib import (
    DEFAULT_COMPLIANCE_TABLE,
    ComplianceEntry,
    ComplianceTable,
    RetentionSample,
    SwitchObservation,
    UnidentifiableDataError,
    compliance_lookup,
    fit_lognormal,
    fit_switch_cdf,
)
from .neuron import LifParams, LifPopulation, LifState, lif_step
from .engine import (
    DT_MS,
    ConnectionSpec,
    InputSpec,
    Network,
    NetworkBuilder,
    NetworkSpec,
    Phase,
    PopulationSpec,
    Protocol,
    SpikeRaster,
    TraceLog,
    firing_rate,
    instantiate,
    run,
)

__version__ = "0.1.0"
