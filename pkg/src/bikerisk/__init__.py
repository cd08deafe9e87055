"""Street-level bicycle accident severity risk modeling toolkit.

Pipeline: accident ingestion with unified severity labels, street network
extraction from OSM XML with edge betweenness as a traffic proxy, logistic
severity models with interaction terms, calibration scoring (Brier / skill
scores, reliability curves), cross-city transfer evaluation, and what-if
infrastructure scenarios served over an HTTP API.
"""

__version__ = "0.1.0"
