"""Smart-metering protocol stack and shared-radio-channel simulator.

Telegram codec -> OBIS translation -> concentrator -> back-office push on
one side; pure/slotted Aloha and CSMA/CA channel access with closed-form
throughput oracles on the other.
"""

from .channel import (
    AckParams,
    ChannelParams,
    DeferMode,
    InvalidScenario,
    Outcome,
    Policy,
    SimMetrics,
    ThroughputPoint,
    TxAttempt,
    analytic_np_csma,
    analytic_pure_aloha,
    analytic_slotted_aloha,
    detect_outcomes,
    run_sim,
    sweep,
    throughput_point,
)
from .codec import (
    CodecError,
    Coding,
    Control,
    DataRecord,
    DeviceType,
    MeterAddress,
    Quantity,
    Telegram,
    Unit,
    crc16,
    decode_telegram,
    encode_telegram,
    pack_manufacturer,
    unpack_manufacturer,
    vif_decode,
)
from .muc import Muc, simulate_scenario
from .obis import ObisCode, ObisReading, format_obis, map_to_obis, parse_obis
from .scenario import Scenario, parse_scenario
from .traffic import (
    Arrival,
    MeterConfig,
    MeterKind,
    MeterState,
    WmbusMode,
    default_profile,
    next_transmission_time,
    offered_load,
)

__version__ = "0.1.0"
