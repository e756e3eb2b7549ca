import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vdparse import rst
from vdparse.rst import Edu, Leaf, Node, ParseError

from util import random_tree

E1 = Leaf(Edu(0, ("person", "spills", "coffee", "on", "shirt")))
E2 = Leaf(Edu(1, ("person", "goes", "to", "bathroom", "and", "cleans", "stains")))
E3 = Leaf(Edu(2, ("person", "dries", "shirt", "with", "handkerchief")))
FIGURE1 = Node("Cause", "RIGHT", E1, Node("Elaboration", "LEFT", E2, E3))
FIGURE1_TOKENS = (
    "( REL:Cause NUC:RIGHT <edu> person spills coffee on shirt </edu> "
    "( REL:Elaboration NUC:LEFT <edu> person goes to bathroom and cleans stains </edu> "
    "<edu> person dries shirt with handkerchief </edu> ) )"
).split()


class TestLinearize:
    def test_figure1_structure(self):
        assert rst.linearize(FIGURE1) == FIGURE1_TOKENS

    def test_single_leaf(self):
        tree = Leaf(Edu(0, ("a",)))
        assert rst.linearize(tree) == ["<edu>", "a", "</edu>"]

    def test_round_trip_identity(self):
        assert rst.parse(rst.linearize(FIGURE1)) == FIGURE1


class TestParse:
    def test_figure1_tokens(self):
        assert rst.parse(FIGURE1_TOKENS) == FIGURE1

    def test_missing_close(self):
        with pytest.raises(ParseError) as exc:
            rst.parse("( REL:Cause NUC:LEFT <edu> a </edu>".split())
        assert exc.value.kind == ParseError.UNBALANCED_PAREN

    def test_empty_edu(self):
        with pytest.raises(ParseError) as exc:
            rst.parse(["<edu>", "</edu>"])
        assert exc.value.kind == ParseError.EMPTY_EDU

    def test_bad_arity(self):
        with pytest.raises(ParseError) as exc:
            rst.parse("( REL:Cause NUC:LEFT <edu> a </edu> )".split())
        assert exc.value.kind == ParseError.BAD_ARITY

    def test_three_children(self):
        toks = "( REL:Cause NUC:LEFT <edu> a </edu> <edu> b </edu> <edu> c </edu> )".split()
        with pytest.raises(ParseError) as exc:
            rst.parse(toks)
        assert exc.value.kind == ParseError.BAD_ARITY

    def test_unknown_relation(self):
        with pytest.raises(ParseError) as exc:
            rst.parse("( REL:Foo NUC:LEFT <edu> a </edu> <edu> b </edu> )".split())
        assert exc.value.kind == ParseError.UNKNOWN_RELATION
        assert exc.value.position == 1

    def test_trailing_tokens(self):
        with pytest.raises(ParseError) as exc:
            rst.parse("<edu> a </edu> <edu> b </edu>".split())
        assert exc.value.kind == ParseError.TRAILING_TOKENS

    def test_stray_close(self):
        with pytest.raises(ParseError) as exc:
            rst.parse([")"])
        assert exc.value.kind == ParseError.UNBALANCED_PAREN

    def test_word_outside_edu(self):
        with pytest.raises(ParseError) as exc:
            rst.parse(["hello"])
        assert exc.value.kind == ParseError.UNEXPECTED_TOKEN

    def test_structural_token_inside_edu(self):
        with pytest.raises(ParseError) as exc:
            rst.parse("<edu> a ( b </edu>".split())
        assert exc.value.kind == ParseError.UNEXPECTED_TOKEN

    def test_missing_nuclearity(self):
        with pytest.raises(ParseError) as exc:
            rst.parse("( REL:Cause <edu> a </edu> <edu> b </edu> )".split())
        assert exc.value.kind == ParseError.UNEXPECTED_TOKEN

    def test_empty_input(self):
        with pytest.raises(ParseError):
            rst.parse([])

    def test_unterminated_edu(self):
        with pytest.raises(ParseError) as exc:
            rst.parse(["<edu>", "a"])
        assert exc.value.kind == ParseError.UNBALANCED_PAREN

    def test_custom_relation_vocabulary(self):
        toks = "( REL:Zig NUC:LEFT <edu> a </edu> <edu> b </edu> )".split()
        tree = rst.parse(toks, relations=("Zig",))
        assert isinstance(tree, Node) and tree.label == "Zig"
        with pytest.raises(ParseError):
            rst.parse(toks)


class TestValidate:
    def test_valid_tree(self):
        assert rst.validate(FIGURE1) == []

    def test_unknown_relation(self):
        tree = Node("Foo", "LEFT", Leaf(Edu(0, ("a",))), Leaf(Edu(1, ("b",))))
        kinds = [v.kind for v in rst.validate(tree)]
        assert kinds == ["UnknownRelation"]
        assert rst.validate(tree)[0].detail == "Foo"

    def test_non_monotone_indices(self):
        tree = Node("Cause", "LEFT",
                    Leaf(Edu(0, ("a",))),
                    Node("Joint", "LEFT", Leaf(Edu(2, ("b",))), Leaf(Edu(1, ("c",)))))
        kinds = [v.kind for v in rst.validate(tree)]
        assert "NonMonotoneEduOrder" in kinds

    def test_gappy_indices(self):
        tree = Node("Cause", "LEFT", Leaf(Edu(0, ("a",))), Leaf(Edu(2, ("b",))))
        kinds = [v.kind for v in rst.validate(tree)]
        assert kinds == ["GappyEduIndices"]

    def test_bad_word(self):
        tree = Leaf(Edu(0, ("Upper",)))
        kinds = [v.kind for v in rst.validate(tree)]
        assert kinds == ["BadWord"]


class TestExtractors:
    def test_figure1_preorder(self):
        assert rst.relation_list(FIGURE1) == ["Cause", "Elaboration"]
        assert rst.edge_list(FIGURE1) == ["RIGHT", "LEFT"]

    def test_leaf(self):
        leaf = Leaf(Edu(0, ("a",)))
        assert rst.relation_list(leaf) == []
        assert rst.edge_list(leaf) == []

    def test_left_branching(self):
        tree = Node("Attribution", "LEFT",
                    Node("Background", "RIGHT", Leaf(Edu(0, ("a",))), Leaf(Edu(1, ("b",)))),
                    Leaf(Edu(2, ("c",))))
        assert rst.relation_list(tree) == ["Attribution", "Background"]
        assert rst.edge_list(tree) == ["LEFT", "RIGHT"]

    def test_counts_match_leaves(self, rng):
        for _ in range(50):
            k = int(rng.integers(1, 9))
            tree = random_tree(rng, k)
            assert len(rst.relation_list(tree)) == k - 1
            assert len(rst.edge_list(tree)) == k - 1
            assert len(rst.leaves(tree)) == k


@st.composite
def trees(draw):
    k = draw(st.integers(min_value=1, max_value=8))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_tree(np.random.default_rng(seed), k)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(trees())
    def test_round_trip(self, tree):
        assert rst.parse(rst.linearize(tree)) == tree

    @settings(max_examples=200, deadline=None)
    @given(trees(), trees())
    def test_injective(self, a, b):
        if a != b:
            assert rst.linearize(a) != rst.linearize(b)

    @settings(max_examples=300, deadline=None)
    @given(trees(), st.data())
    def test_fuzzed_parses_relinearize(self, tree, data):
        """Any mutation parse accepts must re-linearize to the same tokens."""
        tokens = rst.linearize(tree)
        n_edits = data.draw(st.integers(min_value=1, max_value=3))
        mutated = list(tokens)
        alphabet = ["(", ")", "<edu>", "</edu>", "REL:Cause", "NUC:LEFT",
                    "NUC:RIGHT", "word", "<s>"]
        for _ in range(n_edits):
            op = data.draw(st.sampled_from(["drop", "dup", "swap", "replace"]))
            if not mutated:
                break
            pos = data.draw(st.integers(min_value=0, max_value=len(mutated) - 1))
            if op == "drop":
                mutated.pop(pos)
            elif op == "dup":
                mutated.insert(pos, mutated[pos])
            elif op == "swap" and len(mutated) > 1:
                other = data.draw(st.integers(min_value=0, max_value=len(mutated) - 1))
                mutated[pos], mutated[other] = mutated[other], mutated[pos]
            else:
                mutated[pos] = data.draw(st.sampled_from(alphabet))
        try:
            parsed = rst.parse(mutated)
        except ParseError:
            return
        assert rst.linearize(parsed) == mutated


class TestTokenization:
    def test_lowercase_and_strip(self):
        assert rst.tokenize_words("The Person, spills COFFEE!") == \
            ["the", "person", "spills", "coffee"]

    def test_keeps_intra_word_marks(self):
        assert rst.tokenize_words("it's a well-known fact.") == \
            ["it's", "a", "well-known", "fact"]

    def test_numbers(self):
        assert rst.tokenize_words("room 101 opens") == ["room", "101", "opens"]


class TestRelationFile:
    def test_read(self, tmp_path):
        path = tmp_path / "rels.txt"
        path.write_text("# comment\nCause\nElaboration  # inline\n\nJoint\n")
        assert rst.read_relations(path) == ("Cause", "Elaboration", "Joint")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "rels.txt"
        path.write_text("# nothing\n")
        with pytest.raises(ValueError):
            rst.read_relations(path)


class TestTreeText:
    def test_round_trip(self):
        text = rst.format_tree(FIGURE1)
        assert rst.read_tree_text(text) == FIGURE1

    def test_round_trip_random(self, rng):
        for _ in range(25):
            tree = random_tree(rng, int(rng.integers(1, 8)))
            assert rst.read_tree_text(rst.format_tree(tree)) == tree

    def test_rejects_trailing(self):
        text = rst.format_tree(Leaf(Edu(0, ("a",)))) + "\nedu 1: b"
        with pytest.raises(ValueError):
            rst.read_tree_text(text)

    def test_rejects_single_child(self):
        with pytest.raises(ValueError):
            rst.read_tree_text("node Cause LEFT\n  edu 0: a")

    def test_line_serialization(self):
        line = rst.to_line(FIGURE1_TOKENS)
        assert rst.from_line(line) == FIGURE1_TOKENS
