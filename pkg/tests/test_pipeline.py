import pytest

from wildtraj.core.errors import LeakageError, SchemaError
from wildtraj.utils.pipeline import RunContext, Stage, StageChain, print_table


class Recorder(Stage):
    def __init__(self, name, result=True, error=None):
        super().__init__()
        self.stage_name = name
        self.result = result
        self.error = error

    async def run(self, ctx: RunContext) -> bool:
        ctx.artifacts.setdefault("order", []).append(self.stage_name)
        if self.error:
            raise self.error
        return self.result


@pytest.fixture
def ctx(tmp_path):
    return RunContext(config=None, out_dir=tmp_path)


async def test_stages_run_in_order(ctx):
    chain = StageChain(quiet=True) >> Recorder("a") >> Recorder("b") >> Recorder("c")
    assert await chain.run(ctx)
    assert ctx.artifacts["order"] == ["a", "b", "c"]
    assert chain.error is None


async def test_chains_compose(ctx):
    chain = (StageChain(quiet=True) >> Recorder("a")) >> (StageChain() >> Recorder("b"))
    assert [s.stage_name for s in chain.stages] == ["a", "b"]
    assert chain.quiet


async def test_start_from(ctx):
    chain = StageChain(quiet=True) >> Recorder("a") >> Recorder("b") >> Recorder("c")
    assert await chain.run(ctx, start_from="b")
    assert ctx.artifacts["order"] == ["b", "c"]
    assert not await chain.run(ctx, start_from="missing")


async def test_false_result_stops(ctx):
    chain = StageChain(quiet=True) >> Recorder("a", result=False) >> Recorder("b")
    assert not await chain.run(ctx)
    assert ctx.artifacts["order"] == ["a"]
    assert chain.failed_stage == "a"
    assert chain.error is None


async def test_pipeline_error_is_kept(ctx):
    chain = StageChain(quiet=True) >> Recorder("a") >> Recorder("split", error=LeakageError("bad")) \
        >> Recorder("c")
    assert not await chain.run(ctx)
    assert isinstance(chain.error, LeakageError)
    assert chain.error.exit_code == 3
    assert chain.failed_stage == "split"
    assert ctx.artifacts["order"] == ["a", "split"]


async def test_other_errors_propagate(ctx):
    chain = StageChain(quiet=True) >> Recorder("a", error=RuntimeError("boom"))
    with pytest.raises(RuntimeError):
        await chain.run(ctx)


def test_error_exit_codes():
    assert SchemaError("x").exit_code == 2
    assert LeakageError("x").exit_code == 3


def test_print_table(capsys):
    rows = [{"target": "grazer", "balanced_acc": 0.75}]
    print_table(rows, ["target", "balanced_acc"], title="Results")
    assert "grazer" in capsys.readouterr().out
    print_table(rows, ["target"], quiet=True)
    assert capsys.readouterr().out == ""
