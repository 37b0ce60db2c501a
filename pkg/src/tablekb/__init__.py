"""tablekb: composition-property extraction from scientific tables.

Submodules follow the pipeline order: table -> graph -> gat/train (model),
supervision/annotate/augment (labeling), units/postprocess/composition
(extraction rules), kb (linking), metrics (scoring), cli (driver).
"""

__version__ = "0.1.0"
