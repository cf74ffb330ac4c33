"""Docker Compose ingestion.

Parses a compose document into a small normalized model covering the six
fields the diagram builder consumes (service name, image, ports, volumes,
depends_on, links). Everything else in the file is ignored on purpose.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import yaml


class ComposeError(ValueError):
    """Malformed or invalid compose document."""


@dataclass(frozen=True)
class PortMapping:
    """One published port. ``host_port`` is None for container-only entries."""

    container_port: int
    host_port: int | None
    raw: str


@dataclass(frozen=True)
class VolumeMapping:
    """One volume entry. ``source`` is a host path, a volume name, or ""
    for anonymous volumes."""

    source: str
    container_path: str
    read_only: bool
    raw: str


@dataclass(frozen=True)
class LinkRef:
    target_service: str
    alias: str


@dataclass
class ServiceSpec:
    name: str
    image: str | None = None
    ports: list[PortMapping] = field(default_factory=list)
    volumes: list[VolumeMapping] = field(default_factory=list)
    depends_on: list[str] = field(default_factory=list)
    links: list[LinkRef] = field(default_factory=list)


@dataclass
class ComposeModel:
    """Services in document order."""

    services: list[ServiceSpec] = field(default_factory=list)

    def service_names(self) -> list[str]:
        return [s.name for s in self.services]


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that rejects duplicate mapping keys and does not apply the
    YAML 1.1 sexagesimal int rule (which would silently turn an unquoted
    port mapping like ``2222:22`` into a single integer)."""


def _construct_mapping(loader: _StrictLoader, node: yaml.MappingNode) -> dict:
    loader.flatten_mapping(node)
    mapping: dict = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in mapping:
            raise ComposeError(
                f"duplicate key {key!r} at line {key_node.start_mark.line + 1}"
            )
        mapping[key] = loader.construct_object(value_node, deep=True)
    return mapping


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping
)

_INT_NO_SEXAGESIMAL = re.compile(
    r"""^(?:[-+]?0b[0-1_]+
        |[-+]?0[0-7_]+
        |[-+]?(?:0|[1-9][0-9_]*)
        |[-+]?0x[0-9a-fA-F_]+)$""",
    re.X,
)
_StrictLoader.yaml_implicit_resolvers = {
    ch: [(tag, regexp) for tag, regexp in mappings if tag != "tag:yaml.org,2002:int"]
    for ch, mappings in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_StrictLoader.add_implicit_resolver(
    "tag:yaml.org,2002:int", _INT_NO_SEXAGESIMAL, list("-+0123456789")
)


def parse_compose(text: str) -> ComposeModel:
    """Parse a compose document.

    Consumes image/ports/volumes/depends_on/links per service; unconsumed
    fields (environment, networks, build, ...) are silently ignored.
    """
    try:
        doc = yaml.load(text, Loader=_StrictLoader)
    except ComposeError:
        raise
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ComposeError(f"malformed document{where}: {exc}") from exc

    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ComposeError("top-level structure must be a mapping")
    if "services" not in doc:
        raise ComposeError("missing 'services' section")
    services_doc = doc.get("services") or {}
    if not isinstance(services_doc, dict):
        raise ComposeError("'services' must be a mapping of service definitions")

    services = []
    for name, body in services_doc.items():
        services.append(_parse_service(str(name), body))
    return ComposeModel(services)


def _parse_service(name: str, body) -> ServiceSpec:
    if body is None:
        body = {}
    if not isinstance(body, dict):
        raise ComposeError(f"service {name!r}: definition must be a mapping")

    image = body.get("image")
    if image is not None:
        if not isinstance(image, str) or not image.strip():
            raise ComposeError(f"service {name!r}: 'image' must be a non-empty string")
        image = image.strip()

    ports = [_parse_port(entry, name) for entry in _as_list(body.get("ports"), name, "ports")]
    volumes = [_parse_volume(entry, name) for entry in _as_list(body.get("volumes"), name, "volumes")]
    depends_on = _parse_depends_on(body.get("depends_on"), name)
    links = [_parse_link(entry, name) for entry in _as_list(body.get("links"), name, "links")]
    return ServiceSpec(
        name=name, image=image, ports=ports, volumes=volumes,
        depends_on=depends_on, links=links,
    )


def _as_list(value, service: str, key: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ComposeError(f"service {service!r}: '{key}' must be a list")
    return value


def _port_number(text: str, raw: str, service: str) -> int:
    if not text.isdigit():
        raise ComposeError(f"service {service!r}: invalid port mapping {raw!r}")
    value = int(text)
    if not 1 <= value <= 65535:
        raise ComposeError(
            f"service {service!r}: port {value} out of range in {raw!r}"
        )
    return value


def _parse_port(entry, service: str) -> PortMapping:
    # Long (map) form: {target: 80, published: 8080, protocol: tcp}.
    if isinstance(entry, dict):
        raw = str(entry)
        target = entry.get("target")
        if target is None:
            raise ComposeError(f"service {service!r}: port entry missing 'target'")
        container = _port_number(str(target), raw, service)
        published = entry.get("published")
        host = _port_number(str(published), raw, service) if published is not None else None
        return PortMapping(container_port=container, host_port=host, raw=raw)

    raw = str(entry)
    spec_part, _, _proto = raw.partition("/")  # protocol suffix is discarded
    pieces = spec_part.split(":")
    if len(pieces) == 1:
        host_text, container_text = "", pieces[0]
    elif len(pieces) == 2:
        host_text, container_text = pieces
    elif len(pieces) == 3:
        # host-ip:host:container -- the bind address is irrelevant here
        host_text, container_text = pieces[1], pieces[2]
    else:
        raise ComposeError(f"service {service!r}: invalid port mapping {raw!r}")
    container = _port_number(container_text, raw, service)
    host = _port_number(host_text, raw, service) if host_text else None
    return PortMapping(container_port=container, host_port=host, raw=raw)


def _is_host_path(source: str) -> bool:
    return source.startswith((".", "/", "~"))


def _parse_volume(entry, service: str) -> VolumeMapping:
    # Long (map) form: {type: bind, source: ./x, target: /y, read_only: true}.
    if isinstance(entry, dict):
        raw = str(entry)
        target = entry.get("target")
        if not isinstance(target, str) or not target:
            raise ComposeError(f"service {service!r}: volume entry missing 'target'")
        source = entry.get("source") or ""
        read_only = bool(entry.get("read_only", False))
        return _make_volume(str(source), target, read_only, raw, service)

    raw = str(entry)
    parts = raw.split(":")
    if len(parts) == 1:
        source, container, mode = "", parts[0], ""
    elif len(parts) == 2:
        source, container, mode = parts[0], parts[1], ""
    elif len(parts) == 3:
        source, container, mode = parts
    else:
        raise ComposeError(f"service {service!r}: invalid volume mapping {raw!r}")
    flags = mode.split(",") if mode else []
    return _make_volume(source, container, "ro" in flags, raw, service)


def _make_volume(
    source: str, container: str, read_only: bool, raw: str, service: str
) -> VolumeMapping:
    if not container.startswith("/"):
        raise ComposeError(
            f"service {service!r}: container path {container!r} must be absolute"
        )
    return VolumeMapping(
        source=source,
        container_path=container.rstrip("/") or "/",
        read_only=read_only,
        raw=raw,
    )


def _parse_depends_on(value, service: str) -> list[str]:
    if value is None:
        return []
    # Long (map) form keeps only the service keys; conditions are run-order
    # detail the diagram does not model.
    if isinstance(value, dict):
        entries = [str(k) for k in value.keys()]
    elif isinstance(value, list):
        entries = [str(v) for v in value]
    else:
        raise ComposeError(f"service {service!r}: 'depends_on' must be a list or mapping")
    for entry in entries:
        if not entry:
            raise ComposeError(f"service {service!r}: empty depends_on entry")
    return entries


def _parse_link(entry, service: str) -> LinkRef:
    raw = str(entry)
    target, _, alias = raw.partition(":")
    if not target:
        raise ComposeError(f"service {service!r}: empty links entry {raw!r}")
    return LinkRef(target_service=target, alias=alias or target)


def normalize_image(raw: str) -> str:
    """Reduce an image reference to its bare repository name, lowercased.

    Digest is cut first, then trailing tags (a ":suffix" with no "/" in
    it, repeated so that malformed multi-colon input still normalizes to
    a fixpoint), then any registry / namespace path prefix. Unparseable
    input falls back to the raw string lowercased.
    """
    if not raw:
        return ""
    name = raw.strip().split("@", 1)[0]
    while True:
        colon = name.rfind(":")
        if colon == -1 or "/" in name[colon + 1 :]:
            break
        name = name[:colon]
    name = name.rsplit("/", 1)[-1]
    return (name or raw.strip()).lower()
