"""Dataset ingestion, graph encoding and complexity statistics."""
from .conllu import read_conllu, write_conllu
from .convert import drop_relation_label, from_dygie, from_spert
from .documents import (NONE_LABEL, DatasetSpec, Document, EncodedGraph, EntitySpan,
                        RelationTriple, StatsRow)
from .encode import anchor_of, bio_tags, encode_graph
from .json_triples import read_json_triples, schema, to_records, write_json_triples
from .stats import complexity_stats, filter_min_relations, format_stats_csv, format_stats_table
from .toy import generate_toy_corpus, toy_spec


def load_documents(path, spec=None):
    """Dispatch on extension: ``.conllu`` treebanks, anything else canonical JSON."""
    if str(path).endswith(".conllu"):
        return read_conllu(path)
    return read_json_triples(path, spec)


__all__ = [
    "NONE_LABEL", "DatasetSpec", "Document", "EncodedGraph", "EntitySpan", "RelationTriple",
    "StatsRow", "anchor_of", "bio_tags", "complexity_stats", "drop_relation_label",
    "encode_graph", "filter_min_relations", "format_stats_csv", "format_stats_table",
    "from_dygie", "from_spert", "generate_toy_corpus", "load_documents", "read_conllu",
    "read_json_triples", "schema", "to_records", "toy_spec", "write_conllu", "write_json_triples",
]
