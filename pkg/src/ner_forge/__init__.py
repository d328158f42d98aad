"""Silver-standard hierarchical NER corpora from Wikipedia dumps and DBpedia classes."""

__version__ = "0.1.0"
