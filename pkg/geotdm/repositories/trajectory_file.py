"""GTRJ trajectory files.

A GTRJ file is a concatenation of self-describing records.  Each record is

    magic "GTRJ" | version u16 | T, N, D, D_h, E as u32
    | coords f32[T, N, D] | features f32[N, D_h] | edges u32[E, 2]
    | CRC32 u32 of every preceding byte of the record

with every number little-endian.  Datasets are stored as one file per split next to a YAML
manifest, and generated trajectories as one file with a YAML sidecar of the same base name.
"""

import csv
import logging
import os
import struct
import zlib
from typing import TYPE_CHECKING

import numpy as np
import torch
import yaml

from geotdm.constants import GTRJ_MAGIC, GTRJ_VERSION, MANIFEST_FILENAME, SPLITS
from geotdm.entities.sample_set import SampleSetMetadata
from geotdm.entities.system import (
    check_manifest,
    check_system_spec,
    DatasetManifest,
    DEFAULT_MANIFEST,
    DEFAULT_SYSTEM_SPECS,
    InvalidSystemSpecException,
    SystemKind,
    SystemSpec,
)
from geotdm.entities.trajectory import GeoTrajectory, TrajectoryBatch
from geotdm.exc import (
    GeometryError,
    InvalidManifestError,
    TrajectoryFileCorrupted,
    TrajectoryFileVersionMismatch,
)
from geotdm.sim import stack_trajectories
from geotdm.usecases.interfaces import TrajectoryStoreInterface
from geotdm.util import InvalidFieldsError, namedtuple_from_dict, namedtuple_to_dict

if TYPE_CHECKING:
    from typing import Any, Dict, List, Optional, Sequence, Tuple

    SplitBatches = Dict[str, TrajectoryBatch]

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<4sH5I")
_CHECKSUM = struct.Struct("<I")


def _checksum(data):
    # type: (Any) -> int
    return zlib.crc32(data) & 0xFFFFFFFF


def encode_trajectory(trajectory):
    # type: (GeoTrajectory) -> bytes
    coords = trajectory.coords.detach().cpu().numpy()
    if coords.ndim != 3:
        raise GeometryError("coords must be T x N x D, got shape {}".format(coords.shape))
    t, n, d = coords.shape
    features = trajectory.node_features.detach().cpu().numpy().reshape(n, -1)
    edges = trajectory.edges.detach().cpu().numpy().reshape(-1, 2)
    record = b"".join(
        [
            _HEADER.pack(GTRJ_MAGIC, GTRJ_VERSION, t, n, d, features.shape[1], edges.shape[0]),
            np.ascontiguousarray(coords, dtype="<f4").tobytes(),
            np.ascontiguousarray(features, dtype="<f4").tobytes(),
            np.ascontiguousarray(edges, dtype="<u4").tobytes(),
        ]
    )
    return record + _CHECKSUM.pack(_checksum(record))


def decode_trajectory(data, offset=0, dt=None):
    # type: (bytes, int, Optional[float]) -> Tuple[GeoTrajectory, int]
    """Decode the record starting at offset; return it and the offset just past it."""
    if len(data) - offset < _HEADER.size:
        raise TrajectoryFileCorrupted("truncated record header at byte {}".format(offset))
    magic, version, t, n, d, d_h, e = _HEADER.unpack_from(data, offset)
    if magic != GTRJ_MAGIC:
        raise TrajectoryFileCorrupted("bad magic {!r} at byte {}".format(magic, offset))
    if version != GTRJ_VERSION:
        msg = "unsupported GTRJ version {} (expected {})".format(version, GTRJ_VERSION)
        raise TrajectoryFileVersionMismatch(msg)
    counts = (t * n * d, n * d_h, 2 * e)
    end = offset + _HEADER.size + 4 * sum(counts)
    if len(data) < end + _CHECKSUM.size:
        raise TrajectoryFileCorrupted("truncated record at byte {}".format(offset))
    (expected,) = _CHECKSUM.unpack_from(data, end)
    if _checksum(memoryview(data)[offset:end]) != expected:
        raise TrajectoryFileCorrupted("checksum mismatch in record at byte {}".format(offset))

    position = offset + _HEADER.size
    arrays = []
    for count, dtype in zip(counts, ("<f4", "<f4", "<u4")):
        arrays.append(np.frombuffer(data, dtype=dtype, count=count, offset=position))
        position += 4 * count
    coords, features, edges = arrays
    trajectory = GeoTrajectory(
        coords=torch.from_numpy(coords.astype(np.float32).reshape(t, n, d)),
        node_features=torch.from_numpy(features.astype(np.float32).reshape(n, d_h)),
        edges=torch.from_numpy(edges.astype(np.int64).reshape(e, 2)),
        dt=dt,
    )
    return trajectory, end + _CHECKSUM.size


def encode_trajectories(trajectories):
    # type: (Sequence[GeoTrajectory]) -> bytes
    return b"".join(encode_trajectory(t) for t in trajectories)


def decode_trajectories(data, dt=None):
    # type: (bytes, Optional[float]) -> List[GeoTrajectory]
    trajectories = []
    offset = 0
    while offset < len(data):
        trajectory, offset = decode_trajectory(data, offset, dt)
        trajectories.append(trajectory)
    return trajectories


def split_path(directory, split):
    # type: (str, str) -> str
    return os.path.join(directory, "{}.gtrj".format(split))


def sidecar_path(path):
    # type: (str) -> str
    return os.path.splitext(path)[0] + ".yaml"


class TrajectoryFileRepository(TrajectoryStoreInterface):
    """Reads and writes GTRJ files on the local filesystem."""

    def write_dataset(self, directory, spec, manifest, dataset):
        # type: (str, SystemSpec, DatasetManifest, Dict[str, List[GeoTrajectory]]) -> None
        if not os.path.isdir(directory):
            os.makedirs(directory)
        for split in SPLITS:
            path = split_path(directory, split)
            with open(path, "wb") as f:
                f.write(encode_trajectories(dataset[split]))
            logger.debug("wrote %d trajectories to %s", len(dataset[split]), path)
        sidecar = {
            "format_version": GTRJ_VERSION,
            "system": namedtuple_to_dict(spec),
            "dataset": namedtuple_to_dict(manifest),
        }
        with open(os.path.join(directory, MANIFEST_FILENAME), "w") as f:
            yaml.safe_dump(sidecar, f, default_flow_style=False)

    def read_manifest(self, directory):
        # type: (str) -> Tuple[SystemSpec, DatasetManifest]
        path = os.path.join(directory, MANIFEST_FILENAME)
        logger.debug("reading manifest %s", path)
        try:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise InvalidManifestError("cannot parse {}: {}".format(path, e))
        if not isinstance(data, dict):
            raise InvalidManifestError("{} must hold a mapping".format(path))
        system = data.get("system") or {}
        try:
            kind = SystemKind(system.get("kind", SystemKind.CHARGED.value))
            spec = namedtuple_from_dict(SystemSpec, system, DEFAULT_SYSTEM_SPECS[kind])
            manifest = namedtuple_from_dict(
                DatasetManifest, data.get("dataset") or {}, DEFAULT_MANIFEST
            )
            check_system_spec(spec)
        except (ValueError, InvalidFieldsError, InvalidSystemSpecException) as e:
            raise InvalidManifestError("{}: {}".format(path, e))
        check_manifest(manifest)
        return spec, manifest

    def read_split(self, directory, split):
        # type: (str, str) -> List[GeoTrajectory]
        spec, _ = self.read_manifest(directory)
        return self._read(split_path(directory, split), spec.dt)

    def load_dataset(self, directory, dtype=torch.float32):
        # type: (str, torch.dtype) -> Tuple[SystemSpec, DatasetManifest, SplitBatches]
        """Read the manifest and every split, stacked into batches."""
        spec, manifest = self.read_manifest(directory)
        batches = {}
        for split in SPLITS:
            trajectories = self._read(split_path(directory, split), spec.dt)
            batches[split] = TrajectoryBatch(*stack_trajectories(trajectories, dtype))
        return spec, manifest, batches

    def write_samples(self, path, trajectories, metadata):
        # type: (str, Sequence[GeoTrajectory], SampleSetMetadata) -> None
        directory = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(directory):
            os.makedirs(directory)
        with open(path, "wb") as f:
            f.write(encode_trajectories(trajectories))
        with open(sidecar_path(path), "w") as f:
            yaml.safe_dump(namedtuple_to_dict(metadata), f, default_flow_style=False)
        logger.debug("wrote %d generated trajectories to %s", len(trajectories), path)

    def read_samples(self, path):
        # type: (str) -> Tuple[List[GeoTrajectory], SampleSetMetadata]
        sidecar = sidecar_path(path)
        try:
            with open(sidecar) as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise InvalidManifestError("cannot parse {}: {}".format(sidecar, e))
        missing = sorted(set(SampleSetMetadata._fields) - set(data))
        if missing:
            raise InvalidManifestError("{} lacks {}".format(sidecar, ", ".join(missing)))
        placeholder = SampleSetMetadata(*[None] * len(SampleSetMetadata._fields))
        try:
            metadata = namedtuple_from_dict(SampleSetMetadata, data, placeholder)
        except InvalidFieldsError as e:
            raise InvalidManifestError("{}: {}".format(sidecar, e))
        trajectories = self._read(path, None)
        expected = metadata.n_trajectories * metadata.samples_per_trajectory
        if len(trajectories) != expected:
            msg = "{} holds {} trajectories, its sidecar promises {}".format(
                path, len(trajectories), expected
            )
            raise TrajectoryFileCorrupted(msg)
        return trajectories, metadata

    def export_csv(self, path, trajectories):
        # type: (str, Sequence[GeoTrajectory]) -> None
        """Write one row per trajectory, frame, and node for external plotting."""
        with open(path, "w") as f:
            writer = csv.writer(f)
            dim = trajectories[0].coords.shape[-1] if trajectories else 0
            columns = ["x{}".format(i) for i in range(dim)]
            writer.writerow(["trajectory", "frame", "node"] + columns)
            for index, trajectory in enumerate(trajectories):
                coords = trajectory.coords.detach().cpu().numpy()
                for frame in range(coords.shape[0]):
                    for node in range(coords.shape[1]):
                        row = [repr(float(v)) for v in coords[frame, node]]
                        writer.writerow([index, frame, node] + row)
        logger.debug("exported %d trajectories to %s", len(trajectories), path)

    @staticmethod
    def _read(path, dt):
        # type: (str, Optional[float]) -> List[GeoTrajectory]
        logger.debug("reading %s", path)
        with open(path, "rb") as f:
            data = f.read()
        return decode_trajectories(data, dt)
