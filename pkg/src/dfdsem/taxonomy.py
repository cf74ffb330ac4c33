"""Domain dictionary: image -> model class/labels, port -> flow/server
labels, container path -> storage kind.

The dictionary is a hand-maintained YAML file (see ``data/services.yml``
for the bundled starter). Everything downstream -- the diagram builder,
the graph lowering, the pattern catalog -- keys off the class names
defined here.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import yaml


class TaxonomyError(ValueError):
    """Malformed taxonomy document."""


class StorageKind(Enum):
    DATA = "Data"
    CONFIG = "Config"
    CERT = "Cert"
    LOG = "Log"
    DOCKER_SOCKET = "DockerSocket"
    UNKNOWN = "Unknown"


_CLASS_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")

#: Every flow label hangs under this class in the generated hierarchy.
NETWORK_FLOW_PARENT = "NetworkFlow"

_PATH_SECTIONS = (
    ("datas", StorageKind.DATA),
    ("configs", StorageKind.CONFIG),
    ("certs", StorageKind.CERT),
    ("logs", StorageKind.LOG),
)


@dataclass(frozen=True)
class ServiceEntry:
    model_name: str
    images: tuple[str, ...]
    labels: tuple[str, ...]


@dataclass(frozen=True)
class PortEntry:
    name: str
    server_label: str
    flow_label: str
    value: int


@dataclass
class Taxonomy:
    service_entries: list[ServiceEntry] = field(default_factory=list)
    port_entries: list[PortEntry] = field(default_factory=list)
    data_paths: list[str] = field(default_factory=list)
    config_paths: list[str] = field(default_factory=list)
    cert_paths: list[str] = field(default_factory=list)
    log_paths: list[str] = field(default_factory=list)
    docker_socket_paths: list[str] = field(default_factory=list)
    #: (subclass, superclass) pairs derived from the entries.
    class_hierarchy: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._image_index = {}
        for entry in self.service_entries:
            for image in entry.images:
                self._image_index[image] = entry
        self._port_index = {p.value: p for p in self.port_entries}

    def class_names(self) -> set[str]:
        """All class names the dictionary can hang on a diagram element."""
        names: set[str] = set()
        for entry in self.service_entries:
            names.add(entry.model_name)
            names.update(entry.labels)
        for port in self.port_entries:
            names.add(port.server_label)
            names.add(port.flow_label)
        return names


def classify_image(tax: Taxonomy, image: str) -> ServiceEntry | None:
    """Exact match of a normalized image name; None when unknown."""
    return tax._image_index.get(image)


def classify_port(tax: Taxonomy, port: int) -> PortEntry | None:
    return tax._port_index.get(port)


def classify_path(tax: Taxonomy, container_path: str) -> StorageKind:
    """Classify an absolute container path.

    Docker-socket paths match exactly; the other kinds match by longest
    configured prefix, where a prefix only matches at a path-component
    boundary ("/data" matches "/data/db" but not "/data2").
    """
    if container_path in tax.docker_socket_paths:
        return StorageKind.DOCKER_SOCKET
    best_len = -1
    best = StorageKind.UNKNOWN
    for prefixes, kind in (
        (tax.data_paths, StorageKind.DATA),
        (tax.config_paths, StorageKind.CONFIG),
        (tax.cert_paths, StorageKind.CERT),
        (tax.log_paths, StorageKind.LOG),
    ):
        for prefix in prefixes:
            if _prefix_matches(prefix, container_path) and len(prefix) > best_len:
                best_len = len(prefix)
                best = kind
    return best


def _prefix_matches(prefix: str, path: str) -> bool:
    if path == prefix:
        return True
    if not prefix.endswith("/"):
        prefix = prefix + "/"
    return path.startswith(prefix)


def load_taxonomy(text: str) -> Taxonomy:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise TaxonomyError(f"malformed taxonomy document: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise TaxonomyError("taxonomy document must be a mapping")

    entries = _load_service_entries(doc.get("services") or [])
    ports = _load_port_entries(doc.get("ports") or [])
    paths = {key: _load_paths(doc, key) for key, _ in _PATH_SECTIONS}
    sockets = _load_paths(doc, "dockerSockets")
    _check_unique_paths(paths, sockets)

    hierarchy: list[tuple[str, str]] = []
    for entry in entries:
        for label in entry.labels:
            hierarchy.append((entry.model_name, label))
    seen_flow_labels: set[str] = set()
    for port in ports:
        if port.flow_label not in seen_flow_labels:
            seen_flow_labels.add(port.flow_label)
            hierarchy.append((port.flow_label, NETWORK_FLOW_PARENT))
    _check_acyclic(hierarchy)

    return Taxonomy(
        service_entries=entries,
        port_entries=ports,
        data_paths=paths["datas"],
        config_paths=paths["configs"],
        cert_paths=paths["certs"],
        log_paths=paths["logs"],
        docker_socket_paths=sockets,
        class_hierarchy=hierarchy,
    )


def _class_name(value, where: str) -> str:
    if not isinstance(value, str) or not _CLASS_NAME.match(value):
        raise TaxonomyError(f"{where}: {value!r} is not a valid class name")
    return value


def _load_service_entries(section) -> list[ServiceEntry]:
    if not isinstance(section, list):
        raise TaxonomyError("'services' must be a list")
    entries: list[ServiceEntry] = []
    image_owner: dict[str, str] = {}
    for i, item in enumerate(section):
        where = f"services[{i}]"
        if not isinstance(item, dict) or "name" not in item:
            raise TaxonomyError(f"{where}: entry must be a mapping with a 'name'")
        name = _class_name(item["name"], where)
        images = item.get("images") or []
        labels = item.get("labels") or []
        if not isinstance(images, list) or not isinstance(labels, list):
            raise TaxonomyError(f"{where} ({name}): 'images' and 'labels' must be lists")
        for image in images:
            if not isinstance(image, str) or not image:
                raise TaxonomyError(f"{where} ({name}): invalid image {image!r}")
            if image in image_owner:
                raise TaxonomyError(
                    f"image {image!r} appears in both {image_owner[image]!r} and {name!r}"
                )
            image_owner[image] = name
        labels = tuple(_class_name(lbl, f"{where} ({name}) label") for lbl in labels)
        entries.append(ServiceEntry(model_name=name, images=tuple(images), labels=labels))
    return entries


def _load_port_entries(section) -> list[PortEntry]:
    if not isinstance(section, list):
        raise TaxonomyError("'ports' must be a list")
    ports: list[PortEntry] = []
    seen: dict[int, str] = {}
    for i, item in enumerate(section):
        where = f"ports[{i}]"
        if not isinstance(item, dict):
            raise TaxonomyError(f"{where}: entry must be a mapping")
        try:
            name = str(item["name"])
            server_label = _class_name(item["label"], where)
            flow_label = _class_name(item["flowLabel"], where)
            value = int(item["value"])
        except KeyError as exc:
            raise TaxonomyError(f"{where}: missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise TaxonomyError(f"{where}: {exc}") from exc
        if not 1 <= value <= 65535:
            raise TaxonomyError(f"{where}: port value {value} out of range")
        if value in seen:
            raise TaxonomyError(
                f"port {value} appears in both {seen[value]!r} and {name!r}"
            )
        seen[value] = name
        ports.append(PortEntry(name=name, server_label=server_label,
                               flow_label=flow_label, value=value))
    return ports


def _load_paths(doc: dict, key: str) -> list[str]:
    section = doc.get(key) or []
    if not isinstance(section, list):
        raise TaxonomyError(f"'{key}' must be a list")
    paths = []
    for item in section:
        if not isinstance(item, str) or not item.startswith("/"):
            raise TaxonomyError(f"{key}: {item!r} is not an absolute path")
        paths.append(item.rstrip("/") or "/")
    return paths


def _check_unique_paths(paths: dict[str, list[str]], sockets: list[str]) -> None:
    owner: dict[str, str] = {}
    for key, entries in list(paths.items()) + [("dockerSockets", sockets)]:
        for path in entries:
            if path in owner and owner[path] != key:
                raise TaxonomyError(
                    f"path {path!r} listed under both {owner[path]!r} and {key!r}"
                )
            owner[path] = key


def _check_acyclic(hierarchy: list[tuple[str, str]]) -> None:
    children: dict[str, set[str]] = {}
    for sub, sup in hierarchy:
        children.setdefault(sub, set()).add(sup)
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    def visit(node: str, trail: list[str]) -> None:
        if state.get(node) == 2:
            return
        if state.get(node) == 1:
            raise TaxonomyError(f"class hierarchy contains a cycle: {' -> '.join(trail + [node])}")
        state[node] = 1
        for parent in children.get(node, ()):
            visit(parent, trail + [node])
        state[node] = 2

    for node in list(children):
        visit(node, [])


def dump_taxonomy(tax: Taxonomy) -> str:
    """Serialize back to the services.yml layout."""
    doc = {
        "services": [
            {"name": e.model_name, "images": list(e.images), "labels": list(e.labels)}
            for e in tax.service_entries
        ],
        "ports": [
            {"name": p.name, "label": p.server_label, "flowLabel": p.flow_label,
             "value": p.value}
            for p in tax.port_entries
        ],
        "datas": list(tax.data_paths),
        "configs": list(tax.config_paths),
        "certs": list(tax.cert_paths),
        "logs": list(tax.log_paths),
        "dockerSockets": list(tax.docker_socket_paths),
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False)


def load_default_taxonomy() -> Taxonomy:
    """Load the starter dictionary bundled with the package."""
    text = resources.files("dfdsem.data").joinpath("services.yml").read_text("utf-8")
    return load_taxonomy(text)
