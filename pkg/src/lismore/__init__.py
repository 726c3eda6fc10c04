"""Character-level neural transliteration between the Book of the Dean of Lismore
orthography and Scottish Gaelic orthography."""

__version__ = "0.1.0"
