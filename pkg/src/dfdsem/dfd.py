"""Depersonalized diagram model and its construction from a compose model.

Every element gets a synthetic name (process0, storage0, flow0, ...) plus a
UUID; nothing from the source document (service names, images, paths,
volume names) survives into the output.
"""
from __future__ import annotations

import random
import uuid
from dataclasses import dataclass, field
from enum import Enum

from .compose import ComposeModel, ServiceSpec, _is_host_path, normalize_image
from .taxonomy import StorageKind, Taxonomy, classify_image, classify_path, classify_port


class BuildError(ValueError):
    """Compose model references that cannot be resolved into a diagram."""


class StencilKind(Enum):
    PROCESS = "process"
    DATA_STORE = "storage"
    EXTERNAL_ENTITY = "external"


# Model classes assigned by the builder itself (everything else comes from
# the domain dictionary).
GENERIC_PROCESS = "GenericProcess"
HOST_STORAGE_CLASS = "HostStorage"
DOCKER_VOLUME_CLASS = "DockerVolume"
DOCKER_SOCKET_CLASS = "DockerSocketStorage"
REMOTE_USER_CLASS = "RemoteUser"

NETWORK_FLOW = "NetworkFlow"
DATA_STORAGE_FLOW = "DataStorageFlow"
CONFIG_STORAGE_FLOW = "ConfigStorageFlow"
CERT_STORAGE_FLOW = "CertStorageFlow"
LOG_STORAGE_FLOW = "LogStorageFlow"
DOCKER_SOCKET_FLOW = "DockerSocketFlow"
DEPEND_FLOW = "DependFlow"
LINK_FLOW = "LinkFlow"

READ_WRITE_FLOW = "ReadWriteFlow"
READ_ONLY_FLOW = "ReadOnlyFlow"

STORAGE_FLOW_CLASSES = frozenset({
    DATA_STORAGE_FLOW, CONFIG_STORAGE_FLOW, CERT_STORAGE_FLOW,
    LOG_STORAGE_FLOW, DOCKER_SOCKET_FLOW,
})

# Unknown paths default to the data kind: the model has no "unknown
# storage" class and data access is the conservative assumption.
_FLOW_CLASS_BY_KIND = {
    StorageKind.DATA: DATA_STORAGE_FLOW,
    StorageKind.CONFIG: CONFIG_STORAGE_FLOW,
    StorageKind.CERT: CERT_STORAGE_FLOW,
    StorageKind.LOG: LOG_STORAGE_FLOW,
    StorageKind.DOCKER_SOCKET: DOCKER_SOCKET_FLOW,
    StorageKind.UNKNOWN: DATA_STORAGE_FLOW,
}


@dataclass
class Stencil:
    name: str
    kind: StencilKind
    model: str
    labels: list[str]
    id: str


@dataclass
class Flow:
    name: str
    model: str
    labels: list[str]
    source_id: str
    target_id: str
    id: str


@dataclass
class DfdModel:
    processes: list[Stencil] = field(default_factory=list)
    storages: list[Stencil] = field(default_factory=list)
    externals: list[Stencil] = field(default_factory=list)
    flows: list[Flow] = field(default_factory=list)

    def stencils(self) -> list[Stencil]:
        return self.processes + self.storages + self.externals

    def stencil_by_id(self, stencil_id: str) -> Stencil:
        for stencil in self.stencils():
            if stencil.id == stencil_id:
                return stencil
        raise KeyError(stencil_id)


class IdGenerator:
    """UUID source; a seed makes the stream reproducible."""

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed) if seed is not None else None

    def new_id(self) -> str:
        if self._rng is None:
            return str(uuid.uuid4())
        return str(uuid.UUID(bytes=self._rng.randbytes(16), version=4))


def _published_ports(service: ServiceSpec):
    # Entries without a host part are container-only exposure and create
    # no external reachability.
    return [p for p in service.ports if p.host_port is not None]


def build_model(compose: ComposeModel, tax: Taxonomy, ids: IdGenerator | None = None) -> DfdModel:
    """Build the depersonalized diagram.

    Flow numbering: first every service in document order emits its
    network flows then its storage flows; then a pass over the services
    emits depend flows; then a final pass emits link flows.
    """
    ids = ids or IdGenerator()
    model = DfdModel()
    proc_by_service: dict[str, Stencil] = {}

    for service in compose.services:
        model_class = GENERIC_PROCESS
        labels: list[str] = []
        if service.image:
            entry = classify_image(tax, normalize_image(service.image))
            if entry is not None:
                model_class = entry.model_name
                labels.extend(entry.labels)
        for port in _published_ports(service):
            port_entry = classify_port(tax, port.container_port)
            if port_entry is not None:
                labels.append(port_entry.server_label)
        stencil = Stencil(
            name=f"process{len(model.processes)}",
            kind=StencilKind.PROCESS,
            model=model_class,
            labels=list(dict.fromkeys(labels)),
            id=ids.new_id(),
        )
        model.processes.append(stencil)
        proc_by_service[service.name] = stencil

    user: Stencil | None = None
    host_storage: Stencil | None = None
    socket_storage: Stencil | None = None
    volumes_by_name: dict[str, Stencil] = {}
    volume_counter = 0

    def new_volume_storage() -> Stencil:
        nonlocal volume_counter
        stencil = Stencil(
            name=f"storage{volume_counter}",
            kind=StencilKind.DATA_STORE,
            model=DOCKER_VOLUME_CLASS,
            labels=[],
            id=ids.new_id(),
        )
        volume_counter += 1
        model.storages.append(stencil)
        return stencil

    def add_flow(flow_class: str, labels: list[str], source: Stencil, target: Stencil) -> None:
        model.flows.append(Flow(
            name=f"flow{len(model.flows)}",
            model=flow_class,
            labels=labels,
            source_id=source.id,
            target_id=target.id,
            id=ids.new_id(),
        ))

    for service in compose.services:
        proc = proc_by_service[service.name]

        for port in _published_ports(service):
            if user is None:
                user = Stencil(
                    name="user", kind=StencilKind.EXTERNAL_ENTITY,
                    model=REMOTE_USER_CLASS, labels=[], id=ids.new_id(),
                )
                model.externals.append(user)
            port_entry = classify_port(tax, port.container_port)
            flow_labels = [port_entry.flow_label] if port_entry is not None else []
            add_flow(NETWORK_FLOW, flow_labels, user, proc)

        for volume in service.volumes:
            kind = classify_path(tax, volume.container_path)
            is_socket = (
                kind is StorageKind.DOCKER_SOCKET
                or volume.source in tax.docker_socket_paths
            )
            if is_socket:
                if socket_storage is None:
                    socket_storage = Stencil(
                        name="dockerSocket", kind=StencilKind.DATA_STORE,
                        model=DOCKER_SOCKET_CLASS, labels=[], id=ids.new_id(),
                    )
                    model.storages.append(socket_storage)
                target = socket_storage
                flow_class = DOCKER_SOCKET_FLOW
            elif _is_host_path(volume.source):
                # All host folders of a diagram collapse into one storage.
                if host_storage is None:
                    host_storage = Stencil(
                        name="hostStorage", kind=StencilKind.DATA_STORE,
                        model=HOST_STORAGE_CLASS, labels=[], id=ids.new_id(),
                    )
                    model.storages.append(host_storage)
                target = host_storage
                flow_class = _FLOW_CLASS_BY_KIND[kind]
            elif volume.source:
                target = volumes_by_name.get(volume.source)
                if target is None:
                    target = new_volume_storage()
                    volumes_by_name[volume.source] = target
                flow_class = _FLOW_CLASS_BY_KIND[kind]
            else:
                # Anonymous volumes are distinct by definition.
                target = new_volume_storage()
                flow_class = _FLOW_CLASS_BY_KIND[kind]
            mode = READ_ONLY_FLOW if volume.read_only else READ_WRITE_FLOW
            add_flow(flow_class, [mode], proc, target)

    for service in compose.services:
        for dep in service.depends_on:
            if dep not in proc_by_service:
                raise BuildError(
                    f"service {service.name!r} depends_on unknown service {dep!r}"
                )
            add_flow(DEPEND_FLOW, [], proc_by_service[service.name], proc_by_service[dep])

    for service in compose.services:
        for link in service.links:
            if link.target_service not in proc_by_service:
                raise BuildError(
                    f"service {service.name!r} links unknown service {link.target_service!r}"
                )
            add_flow(LINK_FLOW, [], proc_by_service[service.name],
                     proc_by_service[link.target_service])

    return model


def docker_socket_storage(model: DfdModel) -> Stencil | None:
    """The dedicated docker-socket storage, present iff a volume mapping
    touched a configured socket path."""
    for stencil in model.storages:
        if stencil.name == "dockerSocket":
            return stencil
    return None


def validate_model(model: DfdModel) -> None:
    """Check the structural invariants; raises BuildError on violation."""
    by_id: dict[str, Stencil] = {}
    names: set[str] = set()
    for stencil in model.stencils():
        if stencil.id in by_id:
            raise BuildError(f"duplicate stencil id {stencil.id}")
        if stencil.name in names:
            raise BuildError(f"duplicate stencil name {stencil.name}")
        by_id[stencil.id] = stencil
        names.add(stencil.name)
        if len(set(stencil.labels)) != len(stencil.labels):
            raise BuildError(f"{stencil.name}: duplicate labels")
        if stencil.kind is StencilKind.EXTERNAL_ENTITY and stencil.model != REMOTE_USER_CLASS:
            raise BuildError(f"{stencil.name}: externals must be {REMOTE_USER_CLASS}")

    for flow in model.flows:
        if flow.source_id not in by_id or flow.target_id not in by_id:
            raise BuildError(f"{flow.name}: dangling endpoint")
        source = by_id[flow.source_id]
        target = by_id[flow.target_id]
        if flow.model == NETWORK_FLOW:
            if source.kind is not StencilKind.EXTERNAL_ENTITY:
                raise BuildError(f"{flow.name}: network flow source must be the user")
            if target.kind is not StencilKind.PROCESS:
                raise BuildError(f"{flow.name}: network flow target must be a process")
        elif flow.model in STORAGE_FLOW_CLASSES:
            if source.kind is not StencilKind.PROCESS or target.kind is not StencilKind.DATA_STORE:
                raise BuildError(f"{flow.name}: storage flow must go process -> storage")
            modes = [l for l in flow.labels if l in (READ_WRITE_FLOW, READ_ONLY_FLOW)]
            if len(modes) != 1:
                raise BuildError(f"{flow.name}: needs exactly one access-mode label")
        elif flow.model in (DEPEND_FLOW, LINK_FLOW):
            if source.kind is not StencilKind.PROCESS or target.kind is not StencilKind.PROCESS:
                raise BuildError(f"{flow.name}: {flow.model} endpoints must be processes")
        else:
            raise BuildError(f"{flow.name}: unknown flow class {flow.model}")
