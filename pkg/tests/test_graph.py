import pytest

from dfdsem.dfd import DfdModel
from dfdsem.graph import (
    CLASSIFIED,
    DATA_FLOW,
    EXTERNAL_INTERACTOR,
    HAS_SOURCE,
    HAS_TARGET,
    IS_SOURCE_OF,
    IS_TARGET_OF,
    IS_EDGE_OF,
    IS_AFFECTED_BY,
    LoweringError,
    PROCESS,
    PropertyAxiomKind,
    RDF_TYPE,
    RELATES,
    STENCIL,
    TARGET,
    base_vocabulary,
    bm,
    inverse_of,
    is_subclass_of,
    local,
    lower,
    subclass_closure,
)
from dfdsem.taxonomy import load_taxonomy


class TestTerms:
    def test_interned(self):
        assert bm("Process") is bm("Process")
        assert local("HTTPFlow") is local("HTTPFlow")
        assert bm("X") is not local("X")

    def test_qualified_names(self):
        assert bm("hasSource").qualified == "bm:hasSource"
        assert local("process0").qualified == ":process0"
        assert RDF_TYPE.qualified == "rdf:type"


class TestBaseVocabulary:
    def test_process_under_stencil(self):
        g = base_vocabulary()
        assert is_subclass_of(g, PROCESS, STENCIL)
        assert is_subclass_of(g, PROCESS, TARGET)

    def test_flows_are_not_targets(self):
        g = base_vocabulary()
        assert not is_subclass_of(g, DATA_FLOW, TARGET)
        assert is_subclass_of(g, DATA_FLOW, STENCIL)

    def test_inverse_pairs(self):
        g = base_vocabulary()
        inverses = {a for a in g.property_axioms
                    if a.kind is PropertyAxiomKind.INVERSE_OF}
        assert inverse_of(HAS_SOURCE, IS_SOURCE_OF) in inverses
        assert inverse_of(IS_SOURCE_OF, HAS_SOURCE) in inverses  # unordered pair
        assert inverse_of(HAS_TARGET, IS_TARGET_OF) in inverses

    def test_relates_symmetric(self):
        g = base_vocabulary()
        assert any(a.kind is PropertyAxiomKind.SYMMETRIC and a.p == RELATES
                   for a in g.property_axioms)

    def test_no_instance_triples(self):
        assert base_vocabulary().triples == set()


class TestLower:
    def test_flow0_axioms(self, fig3_explicit):
        g = fig3_explicit
        flow0 = local("flow0")
        assert g.has(flow0, RDF_TYPE, local("HTTPFlow"))
        assert g.has(flow0, RDF_TYPE, local("NetworkFlow"))
        assert g.has(flow0, RDF_TYPE, DATA_FLOW)
        assert g.has(flow0, HAS_SOURCE, local("user"))
        assert g.has(flow0, HAS_TARGET, local("process0"))

    def test_process0_types(self, fig3_explicit):
        g = fig3_explicit
        process0 = local("process0")
        for cls in ("DevelopmentEnvironment", "HTTPServer", "PHPEnv"):
            assert g.has(process0, RDF_TYPE, local(cls))
        assert g.has(process0, RDF_TYPE, PROCESS)

    def test_kind_assertions(self, fig3_explicit):
        assert fig3_explicit.has(local("hostStorage"), RDF_TYPE, bm("DataStore"))
        assert fig3_explicit.has(local("user"), RDF_TYPE, EXTERNAL_INTERACTOR)

    def test_empty_model_with_empty_taxonomy_is_base_vocabulary(self):
        g = lower(DfdModel(), load_taxonomy(""))
        base = base_vocabulary()
        assert g.triples == base.triples
        assert g.subclass_axioms == base.subclass_axioms
        assert g.property_axioms == base.property_axioms

    def test_taxonomy_hierarchy_merged(self, fig3_explicit):
        assert (local("PHPEnv"), local("DevelopmentEnvironment")) in fig3_explicit.subclass_axioms
        assert (local("HTTPFlow"), local("NetworkFlow")) in fig3_explicit.subclass_axioms

    def test_taxonomy_classes_sit_under_classified(self, fig3_explicit):
        assert (local("PHPEnv"), CLASSIFIED) in fig3_explicit.subclass_axioms
        assert (local("HTTPServer"), CLASSIFIED) in fig3_explicit.subclass_axioms
        # Builder-internal classes are not dictionary classes.
        assert (local("HostStorage"), CLASSIFIED) not in fig3_explicit.subclass_axioms

    def test_no_reasoner_output_predicates(self, fig3_explicit):
        forbidden = {IS_SOURCE_OF, IS_TARGET_OF, IS_EDGE_OF, RELATES, IS_AFFECTED_BY}
        assert all(t.predicate not in forbidden for t in fig3_explicit.triples)

    def test_every_flow_has_one_source_and_one_target(self, fig3_model, fig3_explicit):
        for flow in fig3_model.flows:
            subject = local(flow.name)
            sources = [t for t in fig3_explicit.triples
                       if t.subject == subject and t.predicate == HAS_SOURCE]
            targets = [t for t in fig3_explicit.triples
                       if t.subject == subject and t.predicate == HAS_TARGET]
            assert len(sources) == 1 and len(targets) == 1

    def test_every_stencil_has_a_type(self, fig3_model, fig3_explicit):
        for stencil in fig3_model.stencils():
            assert any(t.subject == local(stencil.name) and t.predicate == RDF_TYPE
                       for t in fig3_explicit.triples)

    def test_deterministic_triple_count(self, fig3_model, taxonomy):
        assert len(lower(fig3_model, taxonomy).triples) == len(
            lower(fig3_model, taxonomy).triples)

    def test_base_class_collision_rejected(self, fig3_model):
        tax = load_taxonomy(
            "services:\n  - name: PHPEnv\n    images: [php]\n    labels: [Process]\n"
        )
        with pytest.raises(LoweringError, match="Process"):
            lower(fig3_model, tax)


class TestSubclassClosure:
    def test_transitive(self):
        a, b, c = local("A"), local("B"), local("C")
        closure = subclass_closure({(a, b), (b, c)})
        assert closure[a] == {b, c}

    def test_cycle_detected(self):
        a, b = local("A"), local("B")
        with pytest.raises(LoweringError, match="cycle"):
            subclass_closure({(a, b), (b, a)})
