from .dataset import EvalQuestion, load_dataset  # noqa: F401
from .judge import JudgeOutcome, judge_answer  # noqa: F401
from .classify import classify_error  # noqa: F401
from .report import EvalRecord, EvalReport, aggregate_metrics  # noqa: F401
from .runner import run_evaluation  # noqa: F401
