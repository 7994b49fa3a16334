"""In-process Thing -> Fog -> Cloud simulator.

A Thing turns a capture window into datagrams, a Fog node turns datagrams
back into identifications, and the Cloud keeps the union of every Fog's
records.  Queues are plain ordered lists; airtime is accounted from datagram
sizes instead of being emulated.
"""
from __future__ import annotations

import configparser
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .classify import ClassifierModel, predict
from .codec import (CODEC_LASSO, Discarded, GateConfig, airtime_s, compress_ds8bp,
                    decode_datagram, decompress, encode_datagram)
from .errors import CorruptEventError, FootfallError, InvalidArgumentError, MalformedDatagramError
from .events import DetectorConfig, extract_events, slice_event
from .features import aggregate_sample, extract_features
from .signal_core import TimeSeries
from .sparse import LassoConfig

log = logging.getLogger(__name__)

CAPTURE_WINDOW_S = 10.0


@dataclass(frozen=True)
class LinkModel:
    data_rate_bps: float = 80_000.0

    def __post_init__(self):
        if not self.data_rate_bps > 0:
            raise InvalidArgumentError("data rate must be positive")

    def airtime(self, n_bytes: int) -> float:
        return airtime_s(n_bytes, self.data_rate_bps)


@dataclass(frozen=True)
class Topology:
    zones: dict  # zone id -> tuple of sub-zone ids, one Thing each; one Fog per zone

    def __post_init__(self):
        for zone, subs in self.zones.items():
            if len(set(subs)) != len(subs):
                raise InvalidArgumentError(f"duplicate sub-zone ids in zone {zone}")
            if not subs:
                raise InvalidArgumentError(f"zone {zone} has no sub-zones")

    def things(self):
        return [(z, s) for z, subs in self.zones.items() for s in subs]


def load_topology(path) -> Topology:
    """Read ``[topology] zones = ...`` and one ``[zone <id>] subzones = ...`` section per zone."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise InvalidArgumentError(f"cannot read topology file {path}")
    try:
        zone_ids = [z.strip() for z in cp["topology"]["zones"].split(",") if z.strip()]
        zones = {z: tuple(s.strip() for s in cp[f"zone {z}"]["subzones"].split(",") if s.strip())
                 for z in zone_ids}
    except KeyError as exc:
        raise InvalidArgumentError(f"topology file is missing {exc}") from exc
    return Topology(zones)


@dataclass(frozen=True)
class Transmission:
    """One datagram on the radio link.

    The onset time rides along as link metadata (the packet timestamp); the
    datagram itself carries only L, the atom indices and the coefficients.
    """
    zone_id: str
    subzone_id: str
    onset_s: float
    datagram: bytes
    airtime_s: float


@dataclass(frozen=True)
class IdentificationRecord:
    timestamp: float  # onset of the last footstep in the sample (s)
    zone_id: str
    subzone_id: str
    predicted_person: int
    confidence: float
    f_count: int

    @property
    def key(self) -> tuple:
        return (self.zone_id, self.subzone_id, self.timestamp)


@dataclass
class ThingReport:
    transmissions: list = field(default_factory=list)
    discarded: list = field(default_factory=list)  # (onset_s, Discarded)

    @property
    def airtime_s(self) -> float:
        return sum(t.airtime_s for t in self.transmissions)


def run_thing(signal: TimeSeries, detector: DetectorConfig = DetectorConfig(),
              gates: GateConfig = GateConfig(), lasso: LassoConfig = CODEC_LASSO,
              link: LinkModel = LinkModel(), zone_id: str = "", subzone_id: str = "",
              time_offset_s: float = 0.0) -> ThingReport:
    """Extract, compress and encode every footfall of one capture window."""
    report = ThingReport()
    for win in extract_events(signal, detector):
        onset = time_offset_s + win.onset_time_s
        result = compress_ds8bp(slice_event(signal, win), gates, lasso)
        if isinstance(result, Discarded):
            log.info("thing %s/%s discarded event at %.3f s: %s", zone_id, subzone_id, onset,
                     result.reason)
            report.discarded.append((onset, result))
            continue
        data = encode_datagram(result)
        report.transmissions.append(Transmission(zone_id, subzone_id, onset, data,
                                                 link.airtime(len(data))))
    return report


# -- persistence -------------------------------------------------------------

class StoreUnreadableError(FootfallError):
    pass


class RecordStore:
    """Append-only newline-delimited JSON records with a sequence number.

    ``path=None`` keeps the records in memory only.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._records: list[IdentificationRecord] = []
        if self.path is not None and self.path.exists():
            self._records = self._load()

    def _load(self):
        out = []
        try:
            with open(self.path) as fh:
                for line in fh:
                    if line.strip():
                        d = json.loads(line)
                        d.pop("seq")
                        out.append(IdentificationRecord(**d))
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise StoreUnreadableError(f"cannot read record store {self.path}: {exc}") from exc
        return out

    def refresh(self) -> None:
        if self.path is not None:
            self._records = self._load() if self.path.exists() else []

    def append(self, record: IdentificationRecord) -> None:
        if self.path is not None:
            line = json.dumps({"seq": len(self._records), **asdict(record)})
            with open(self.path, "a") as fh:
                fh.write(line + "\n")
        self._records.append(record)

    def records(self) -> list[IdentificationRecord]:
        return list(self._records)

    def keys(self) -> set:
        return {r.key for r in self._records}

    def __len__(self):
        return len(self._records)


# -- fog ---------------------------------------------------------------------

@dataclass
class _SubzoneState:
    buffer: list = field(default_factory=list)  # (onset_s, FeatureVector)
    prev_onset: float | None = None


class FogNode:
    """One zone's gateway.

    Keeps, per sub-zone, the onset of the last received footstep (for the
    cadence) and a buffer of up to F feature vectors.  Both persist across
    capture windows; a partial buffer is held until it fills.
    """

    def __init__(self, zone_id: str, model: ClassifierModel, f_count: int,
                 store: RecordStore | None = None):
        if f_count < 1:
            raise InvalidArgumentError("f_count must be >= 1")
        self.zone_id = zone_id
        self.model = model
        self.f_count = f_count
        self.store = store if store is not None else RecordStore()
        self._state: dict[str, _SubzoneState] = {}
        self.skipped = 0

    def receive(self, tx: Transmission) -> IdentificationRecord | None:
        try:
            event = decode_datagram(tx.datagram)
            signal = decompress(event)
        except (MalformedDatagramError, CorruptEventError) as exc:
            log.warning("fog %s skipped a datagram from %s: %s", self.zone_id, tx.subzone_id, exc)
            self.skipped += 1
            return None
        st = self._state.setdefault(tx.subzone_id, _SubzoneState())
        st.buffer.append((tx.onset_s, extract_features(signal, tx.onset_s, st.prev_onset)))
        st.prev_onset = tx.onset_s
        if len(st.buffer) < self.f_count:
            return None
        sample = aggregate_sample([fv for _, fv in st.buffer], self.f_count)
        label, conf = predict(self.model, sample)
        record = IdentificationRecord(st.buffer[-1][0], self.zone_id, tx.subzone_id, label, conf,
                                      self.f_count)
        st.buffer.clear()
        self.store.append(record)
        return record

    def pending(self, subzone_id: str) -> int:
        st = self._state.get(subzone_id)
        return len(st.buffer) if st else 0


def run_fog(transmissions, model: ClassifierModel, f_count: int, zone_id: str = "",
            store: RecordStore | None = None) -> list[IdentificationRecord]:
    node = FogNode(zone_id, model, f_count, store)
    out = []
    for tx in transmissions:
        rec = node.receive(tx)
        if rec is not None:
            out.append(rec)
    return out


# -- cloud -------------------------------------------------------------------

@dataclass
class SyncResult:
    added: int
    failed: list  # stores that could not be read, with the reason

    @property
    def complete(self) -> bool:
        return not self.failed


def sync_cloud(fog_stores, cloud_store: RecordStore) -> SyncResult:
    """Copy every fog record whose (zone, sub-zone, timestamp) key the cloud lacks."""
    seen = cloud_store.keys()
    added, failed = 0, []
    for store in fog_stores:
        try:
            store.refresh()
            records = store.records()
        except StoreUnreadableError as exc:
            failed.append((store, str(exc)))
            continue
        for rec in records:
            if rec.key not in seen:
                cloud_store.append(rec)
                seen.add(rec.key)
                added += 1
    return SyncResult(added, failed)


# -- whole-topology run --------------------------------------------------------

@dataclass
class SimulationResult:
    fog_stores: dict  # zone -> RecordStore
    cloud: RecordStore
    reports: dict  # (zone, subzone) -> list of ThingReport, one per capture window
    sync: SyncResult

    def summary(self) -> dict:
        out = {}
        for zone, store in self.fog_stores.items():
            reps = [r for (z, _), rs in self.reports.items() if z == zone for r in rs]
            out[zone] = {
                "records": len(store),
                "datagrams": sum(len(r.transmissions) for r in reps),
                "discarded": sum(len(r.discarded) for r in reps),
                "airtime_s": sum(r.airtime_s for r in reps),
            }
        return out


def simulate(topology: Topology, captures: dict, model: ClassifierModel, f_count: int,
             store_dir=None, detector: DetectorConfig = DetectorConfig(),
             gates: GateConfig = GateConfig(), lasso: LassoConfig = CODEC_LASSO,
             link: LinkModel = LinkModel(), window_s: float = CAPTURE_WINDOW_S) -> SimulationResult:
    """Run every Thing's capture windows through its zone's Fog, then sync the Cloud.

    ``captures`` maps (zone, subzone) to a list of consecutive capture
    windows (TimeSeries); window k starts at ``k * window_s`` seconds.
    """
    if store_dir is not None:
        os.makedirs(store_dir, exist_ok=True)

    def store(name):
        return RecordStore(None if store_dir is None else Path(store_dir) / f"{name}.ndjson")

    fogs = {z: FogNode(z, model, f_count, store(f"fog-{z}")) for z in topology.zones}
    reports = {}
    for zone, sub in topology.things():
        reports[(zone, sub)] = []
        for k, window in enumerate(captures.get((zone, sub), [])):
            rep = run_thing(window, detector, gates, lasso, link, zone, sub, k * window_s)
            reports[(zone, sub)].append(rep)
            for tx in rep.transmissions:
                fogs[zone].receive(tx)
    cloud = store("cloud")
    result = sync_cloud([f.store for f in fogs.values()], cloud)
    return SimulationResult({z: f.store for z, f in fogs.items()}, cloud, reports, result)
