from .metrics import (
    balanced_accuracy,
    balanced_accuracy_detail,
    confusion_matrix,
    f1_positive,
    roc_auc,
    roc_auc_pairs,
)
from .report import (
    MetricsReport,
    StudyMetrics,
    compare,
    evaluate,
    evaluate_checkpoint,
    print_comparison,
    read_report,
    score_days,
    write_report,
)

__all__ = [
    "MetricsReport",
    "StudyMetrics",
    "balanced_accuracy",
    "balanced_accuracy_detail",
    "compare",
    "confusion_matrix",
    "evaluate",
    "evaluate_checkpoint",
    "f1_positive",
    "print_comparison",
    "read_report",
    "roc_auc",
    "roc_auc_pairs",
    "score_days",
    "write_report",
]
