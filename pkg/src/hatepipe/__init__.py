"""Pipeline toolkit for detecting hate speech and its targets in
text-embedded images: OCR extraction, back-translation augmentation,
classifier ensembling, LLM prompting, and evaluation reports."""

__version__ = "0.1.0"
