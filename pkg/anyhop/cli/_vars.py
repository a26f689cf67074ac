"""Constants for CLI rendering.

Constants
---------
DECISION_COLORS : dict
    Rich color of each reader decision in answer tables
METRIC_LABELS : dict
    Display label of each aggregate metric, in display order
"""

DECISION_COLORS = {
    "span": "green",
    "no_answer": "yellow",
}

METRIC_LABELS = {
    "paragraph_em": "Paragraph EM",
    "paragraph_recall": "Paragraph Recall",
    "answer_em": "Answer EM",
    "answer_f1": "Answer F1",
}
