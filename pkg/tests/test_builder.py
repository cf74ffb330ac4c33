import pytest
from hypothesis import given, settings, strategies as st

from dfdsem.compose import parse_compose
from dfdsem.dfd import (
    BuildError,
    IdGenerator,
    StencilKind,
    build_model,
    docker_socket_storage,
    validate_model,
)
from dfdsem.taxonomy import load_default_taxonomy

from conftest import FIG3_COMPOSE


def flows_as_tuples(model):
    by_id = {s.id: s for s in model.stencils()}
    return [
        (f.name, f.model, tuple(f.labels), by_id[f.source_id].name, by_id[f.target_id].name)
        for f in model.flows
    ]


def build(text, seed=0, tax=None):
    tax = tax or load_default_taxonomy()
    return build_model(parse_compose(text), tax, IdGenerator(seed))


class TestWorkedExample:
    def test_processes(self, fig3_model):
        assert [(p.name, p.model, p.labels) for p in fig3_model.processes] == [
            ("process0", "PHPEnv", ["DevelopmentEnvironment", "HTTPServer"]),
            ("process1", "NoSQLDatabase", ["Database"]),
        ]

    def test_storages_and_externals(self, fig3_model):
        assert [(s.name, s.model) for s in fig3_model.storages] == [
            ("hostStorage", "HostStorage"),
            ("storage0", "DockerVolume"),
        ]
        assert [(e.name, e.model) for e in fig3_model.externals] == [("user", "RemoteUser")]

    def test_flow_wiring_and_numbering(self, fig3_model):
        assert flows_as_tuples(fig3_model) == [
            ("flow0", "NetworkFlow", ("HTTPFlow",), "user", "process0"),
            ("flow1", "DataStorageFlow", ("ReadWriteFlow",), "process0", "hostStorage"),
            ("flow2", "DataStorageFlow", ("ReadWriteFlow",), "process1", "storage0"),
            ("flow3", "DependFlow", (), "process0", "process1"),
            ("flow4", "LinkFlow", (), "process1", "process0"),
        ]

    def test_every_element_has_a_uuid(self, fig3_model):
        ids = [s.id for s in fig3_model.stencils()] + [f.id for f in fig3_model.flows]
        assert len(set(ids)) == len(ids)
        for value in ids:
            assert len(value) == 36 and value.count("-") == 4


class TestConstructionRules:
    def test_bare_service_creates_nothing_but_a_process(self):
        model = build("services:\n  a: {image: nginx}\n")
        assert len(model.processes) == 1
        assert model.storages == [] and model.externals == [] and model.flows == []

    def test_unknown_image_is_generic_process(self):
        model = build("services:\n  a: {image: totally-custom-app}\n")
        assert model.processes[0].model == "GenericProcess"
        assert model.processes[0].labels == []

    def test_missing_image_is_generic_process(self):
        model = build("services:\n  a: {build: .}\n")
        assert model.processes[0].model == "GenericProcess"

    def test_config_volume_read_only(self):
        model = build('services:\n  a:\n    volumes: ["./conf:/etc/app:ro"]\n')
        assert flows_as_tuples(model) == [
            ("flow0", "ConfigStorageFlow", ("ReadOnlyFlow",), "process0", "hostStorage"),
        ]

    def test_unknown_path_defaults_to_data_flow(self):
        model = build('services:\n  a:\n    volumes: ["./x:/opt/nowhere"]\n')
        assert model.flows[0].model == "DataStorageFlow"

    def test_user_absent_without_published_ports(self):
        model = build('services:\n  a:\n    image: nginx\n    volumes: ["./x:/srv"]\n')
        assert model.externals == []

    def test_container_only_port_creates_no_flow(self):
        model = build("services:\n  a:\n    image: nginx\n    ports: [80]\n")
        assert model.externals == [] and model.flows == []
        assert "HTTPServer" not in model.processes[0].labels

    def test_each_published_port_gets_its_own_flow(self):
        model = build('services:\n  a:\n    image: nginx\n    ports: ["80:80", "443:443"]\n')
        assert [tuple(f.labels) for f in model.flows] == [("HTTPFlow",), ("HTTPSFlow",)]
        assert model.processes[0].labels == ["WebServer", "HTTPServer", "HTTPSServer"]

    def test_port_classified_by_container_side(self):
        model = build('services:\n  a:\n    image: nginx\n    ports: ["12345:80"]\n')
        assert model.flows[0].labels == ["HTTPFlow"]

    def test_unclassified_port_flow_has_no_label(self):
        model = build('services:\n  a:\n    ports: ["61999:61999"]\n')
        assert model.flows[0].model == "NetworkFlow"
        assert model.flows[0].labels == []

    def test_named_volume_shared_across_services(self):
        model = build(
            "services:\n"
            '  a: {volumes: ["db:/data/db"]}\n'
            '  b: {volumes: ["db:/data/db"]}\n'
        )
        assert [(s.name, s.model) for s in model.storages] == [("storage0", "DockerVolume")]
        assert len(model.flows) == 2
        assert model.flows[0].target_id == model.flows[1].target_id

    def test_anonymous_volumes_are_distinct(self):
        model = build('services:\n  a: {volumes: ["/data", "/srv"]}\n')
        assert [s.name for s in model.storages] == ["storage0", "storage1"]

    def test_all_host_paths_collapse_into_one_storage(self):
        model = build(
            'services:\n  a: {volumes: ["./x:/srv", "/opt/y:/var/www/html"]}\n'
        )
        assert [s.name for s in model.storages] == ["hostStorage"]
        assert len(model.flows) == 2

    def test_unknown_depends_on_is_an_error(self):
        with pytest.raises(BuildError, match="'ghost'"):
            build("services:\n  a:\n    depends_on: [ghost]\n")

    def test_unknown_link_is_an_error(self):
        with pytest.raises(BuildError, match="'ghost'"):
            build("services:\n  a:\n    links: [ghost]\n")


class TestDockerSocket:
    def test_socket_mount_creates_dedicated_storage(self):
        model = build(
            'services:\n  a:\n    volumes: ["/var/run/docker.sock:/var/run/docker.sock"]\n'
        )
        assert [(s.name, s.model) for s in model.storages] == [
            ("dockerSocket", "DockerSocketStorage")
        ]
        assert flows_as_tuples(model) == [
            ("flow0", "DockerSocketFlow", ("ReadWriteFlow",), "process0", "dockerSocket"),
        ]

    def test_read_only_socket(self):
        model = build(
            'services:\n  a:\n    volumes: ["/var/run/docker.sock:/var/run/docker.sock:ro"]\n'
        )
        assert model.flows[0].labels == ["ReadOnlyFlow"]

    def test_source_side_socket_path_still_counts(self):
        model = build(
            'services:\n  a:\n    volumes: ["/var/run/docker.sock:/tmp/docker.sock"]\n'
        )
        assert model.storages[0].name == "dockerSocket"
        assert model.flows[0].model == "DockerSocketFlow"

    def test_no_socket_no_stencil(self, fig3_model):
        assert docker_socket_storage(fig3_model) is None

    def test_accessor_finds_the_stencil(self):
        model = build(
            'services:\n  a:\n    volumes: ["/var/run/docker.sock:/var/run/docker.sock"]\n'
        )
        stencil = docker_socket_storage(model)
        assert stencil is not None and stencil.model == "DockerSocketStorage"


    def test_socket_is_separate_from_host_storage(self):
        model = build(
            "services:\n  a:\n    volumes:\n"
            '      - "/var/run/docker.sock:/var/run/docker.sock"\n'
            '      - "./data:/srv"\n'
        )
        assert [s.name for s in model.storages] == ["dockerSocket", "hostStorage"]


class TestDeterminism:
    def test_seeded_builds_are_identical(self):
        a = build(FIG3_COMPOSE, seed=99)
        b = build(FIG3_COMPOSE, seed=99)
        assert a == b

    def test_different_seeds_differ_only_in_ids(self):
        a = build(FIG3_COMPOSE, seed=1)
        b = build(FIG3_COMPOSE, seed=2)
        assert a != b
        assert flows_as_tuples(a) == flows_as_tuples(b)

    def test_depersonalized(self):
        import dataclasses
        import json

        model = build(FIG3_COMPOSE)
        blob = json.dumps(
            [dataclasses.asdict(s) for s in model.stencils()]
            + [dataclasses.asdict(f) for f in model.flows],
            default=str,
        )
        for fragment in ("web", "mongo", "php", "dbdata", "/var/www", "./app"):
            assert fragment not in blob


_service_names = st.lists(
    st.text(alphabet="abcdef", min_size=1, max_size=4), min_size=1, max_size=5,
    unique=True,
)


@st.composite
def compose_documents(draw):
    names = draw(_service_names)
    lines = ["services:"]
    for name in names:
        lines.append(f"  {name}:")
        image = draw(st.sampled_from(["nginx", "php", "mysql", "unknown-img", None]))
        if image:
            lines.append(f"    image: {image}")
        ports = draw(st.lists(st.sampled_from(
            ['"80:80"', '"443:443"', '"3306:3306"', '"9999:9999"', "80"]), max_size=2))
        if ports:
            lines.append("    ports: [" + ", ".join(ports) + "]")
        volumes = draw(st.lists(st.sampled_from([
            '"./a:/var/www/html"', '"named:/data/db"', '"/data"',
            '"./c:/etc/app:ro"', '"/var/run/docker.sock:/var/run/docker.sock"',
        ]), max_size=2))
        if volumes:
            lines.append("    volumes: [" + ", ".join(volumes) + "]")
        deps = draw(st.lists(st.sampled_from(names), max_size=2, unique=True))
        if deps:
            lines.append("    depends_on: [" + ", ".join(deps) + "]")
        links = draw(st.lists(st.sampled_from(names), max_size=1))
        if links:
            lines.append("    links: [" + ", ".join(links) + "]")
    return "\n".join(lines) + "\n"


class TestModelProperties:
    @settings(max_examples=60, deadline=None)
    @given(compose_documents())
    def test_endpoint_typing_invariants(self, text):
        model = build(text)
        validate_model(model)

    @settings(max_examples=60, deadline=None)
    @given(compose_documents())
    def test_flow_count_law(self, text):
        compose = parse_compose(text)
        model = build(text)
        published = sum(
            1 for s in compose.services for p in s.ports if p.host_port is not None
        )
        volumes = sum(len(s.volumes) for s in compose.services)
        depends = sum(len(s.depends_on) for s in compose.services)
        links = sum(len(s.links) for s in compose.services)
        assert len(model.flows) == published + volumes + depends + links

    @settings(max_examples=40, deadline=None)
    @given(compose_documents())
    def test_kind_partition(self, text):
        model = build(text)
        for stencil in model.processes:
            assert stencil.kind is StencilKind.PROCESS
        for stencil in model.storages:
            assert stencil.kind is StencilKind.DATA_STORE
        for stencil in model.externals:
            assert stencil.kind is StencilKind.EXTERNAL_ENTITY
