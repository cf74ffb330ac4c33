import pytest

from dfdsem.taxonomy import (
    StorageKind,
    TaxonomyError,
    classify_image,
    classify_path,
    classify_port,
    dump_taxonomy,
    load_default_taxonomy,
    load_taxonomy,
)

EXCERPT = """\
services:
  - name: PHPEnv
    images:
      - php
    labels:
      - DevelopmentEnvironment
  - name: NoSQLDatabase
    images:
      - mongodb
      - mongo
    labels:
      - Database

ports:
  - name: HTTP
    label: HTTPServer
    flowLabel: HTTPFlow
    value: 80

datas:
  - /data/db
  - /var/www/html

configs:
  - /etc/mysql

dockerSockets:
  - /var/run/docker.sock
"""


@pytest.fixture()
def excerpt():
    return load_taxonomy(EXCERPT)


class TestLoad:
    def test_entries(self, excerpt):
        php = classify_image(excerpt, "php")
        assert php.model_name == "PHPEnv"
        assert php.labels == ("DevelopmentEnvironment",)
        mongo = classify_image(excerpt, "mongo")
        assert mongo.model_name == "NoSQLDatabase"
        assert mongo.labels == ("Database",)
        assert classify_image(excerpt, "mongodb") is mongo

    def test_hierarchy_pairs(self, excerpt):
        assert ("PHPEnv", "DevelopmentEnvironment") in excerpt.class_hierarchy
        assert ("NoSQLDatabase", "Database") in excerpt.class_hierarchy
        assert ("HTTPFlow", "NetworkFlow") in excerpt.class_hierarchy

    def test_two_labels_two_pairs(self):
        tax = load_taxonomy(
            "services:\n  - name: Redis\n    images: [redis]\n"
            "    labels: [CacheDatabase, Database]\n"
        )
        assert ("Redis", "CacheDatabase") in tax.class_hierarchy
        assert ("Redis", "Database") in tax.class_hierarchy

    def test_empty_document(self):
        tax = load_taxonomy("")
        assert classify_image(tax, "php") is None
        assert classify_port(tax, 80) is None
        assert classify_path(tax, "/var/www/html") is StorageKind.UNKNOWN

    def test_duplicate_image_names_both_entries(self):
        text = (
            "services:\n"
            "  - name: A\n    images: [img]\n    labels: []\n"
            "  - name: B\n    images: [img]\n    labels: []\n"
        )
        with pytest.raises(TaxonomyError, match="'A'.*'B'"):
            load_taxonomy(text)

    def test_duplicate_port_value(self):
        text = (
            "ports:\n"
            "  - {name: HTTP, label: HTTPServer, flowLabel: HTTPFlow, value: 80}\n"
            "  - {name: WEB, label: WebServer, flowLabel: WebFlow, value: 80}\n"
        )
        with pytest.raises(TaxonomyError, match="port 80"):
            load_taxonomy(text)

    def test_malformed_entry_reports_path(self):
        with pytest.raises(TaxonomyError, match=r"services\[0\]"):
            load_taxonomy("services:\n  - images: [x]\n")

    def test_bad_class_name(self):
        with pytest.raises(TaxonomyError, match="not a valid class name"):
            load_taxonomy("services:\n  - name: 'has space'\n    images: [x]\n")

    def test_cyclic_hierarchy_rejected(self):
        text = (
            "services:\n"
            "  - name: A\n    images: [a]\n    labels: [B]\n"
            "  - name: B\n    images: [b]\n    labels: [A]\n"
        )
        with pytest.raises(TaxonomyError, match="cycle"):
            load_taxonomy(text)


class TestClassify:
    def test_image_unknown(self, excerpt):
        assert classify_image(excerpt, "totally-custom-app") is None

    def test_port(self, excerpt):
        entry = classify_port(excerpt, 80)
        assert (entry.name, entry.server_label, entry.flow_label) == (
            "HTTP", "HTTPServer", "HTTPFlow")
        assert classify_port(excerpt, 61999) is None

    def test_port_3306_is_a_db_flow(self):
        entry = classify_port(load_default_taxonomy(), 3306)
        assert entry.flow_label == "DBFlow"

    def test_paths(self, excerpt):
        assert classify_path(excerpt, "/var/www/html") is StorageKind.DATA
        assert classify_path(excerpt, "/etc/mysql") is StorageKind.CONFIG
        assert classify_path(excerpt, "/var/run/docker.sock") is StorageKind.DOCKER_SOCKET
        assert classify_path(excerpt, "/opt/nowhere") is StorageKind.UNKNOWN

    def test_longest_prefix_wins(self):
        tax = load_taxonomy("datas:\n  - /data\nconfigs:\n  - /data/db\n")
        assert classify_path(tax, "/data/db/x") is StorageKind.CONFIG
        assert classify_path(tax, "/data/other") is StorageKind.DATA

    def test_prefix_respects_component_boundary(self):
        tax = load_taxonomy("datas:\n  - /data\n")
        assert classify_path(tax, "/data2") is StorageKind.UNKNOWN
        assert classify_path(tax, "/data/x") is StorageKind.DATA
        assert classify_path(tax, "/data") is StorageKind.DATA

    def test_socket_match_is_exact(self, excerpt):
        assert classify_path(excerpt, "/var/run/docker.sock/sub") is StorageKind.UNKNOWN


class TestRoundTrip:
    def test_dump_load_classification_equivalent(self, excerpt):
        reloaded = load_taxonomy(dump_taxonomy(excerpt))
        for image in ("php", "mongo", "mongodb", "nginx", "nope"):
            assert classify_image(reloaded, image) == classify_image(excerpt, image)
        for port in (80, 443, 3306, 61999):
            assert classify_port(reloaded, port) == classify_port(excerpt, port)
        for path in ("/var/www/html", "/etc/mysql", "/var/run/docker.sock", "/x"):
            assert classify_path(reloaded, path) == classify_path(excerpt, path)
        assert reloaded.class_hierarchy == excerpt.class_hierarchy

    def test_starter_dictionary_round_trips(self):
        tax = load_default_taxonomy()
        reloaded = load_taxonomy(dump_taxonomy(tax))
        assert reloaded.class_hierarchy == tax.class_hierarchy
        assert reloaded.service_entries == tax.service_entries
        assert reloaded.port_entries == tax.port_entries


class TestStarterDictionary:
    def test_pattern_classes_all_present(self):
        needed = {
            "WebServer", "DevelopmentEnvironment", "Database", "NoSQLDatabase",
            "CacheDatabase", "WebProxy", "DataCollector", "DataVisualizer",
            "DatabaseManagement", "MessageBroker", "HTTPServer",
        }
        assert needed <= load_default_taxonomy().class_names()

    def test_http_https_db_flow_labels(self):
        tax = load_default_taxonomy()
        flow_labels = {p.flow_label for p in tax.port_entries}
        assert {"HTTPFlow", "HTTPSFlow", "DBFlow"} <= flow_labels
