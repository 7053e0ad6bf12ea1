"""HTTP service exposing the simulator.

The CLI talks to this API (in-process by default); it is also mountable
under uvicorn for remote use. All request payloads are JSON documents in
the same schema configio reads from disk, so a run file can be POSTed
as-is. Traces travel as column names plus row arrays; numbers round-trip
exactly, so a client writing the rows with the standard trace formatter
reproduces the server's files byte for byte.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple, Union

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import configio
from .muscle import allocate_tensions, default_muscle_config
from .plant import IntegrationBlowUpError, PlantParams, SingularPlantError, build_linear_model
from .qp import QpInfeasibleError
from .riccati import CareDivergenceError, LqrWeights, NotStabilizableError, solve_care
from .runner import RunResult, SimConfig, run_scenario
from .scenarios import builtin_scenarios, scenario_by_name

try:  # installed distribution name
    from importlib.metadata import version as _dist_version
    __service_version__ = _dist_version("wipsim")
except Exception:  # pragma: no cover - source tree without install
    __service_version__ = "0.0.0"


class ScenarioSummary(BaseModel):
    name: str
    duration: float
    description: str
    envelopes: int


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Union[str, Dict[str, Any]]
    config: Optional[Dict[str, Any]] = None
    overrides: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    include_trace: bool = True
    channels: List[str] = Field(default_factory=list)


class EnvelopeOut(BaseModel):
    name: str
    kind: str
    signal: str
    passed: bool
    value: float
    threshold: float
    margin: float
    detail: str


class ReportOut(BaseModel):
    scenario: str
    passed: bool
    envelopes: List[EnvelopeOut]


class TraceOut(BaseModel):
    columns: List[str]
    rows: List[List[float]]


class RunResponse(BaseModel):
    scenario: str
    passed: bool
    report: ReportOut
    events_applied: Dict[str, int]
    trace: Optional[TraceOut] = None


class CheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: Optional[int] = None


class CheckResponse(BaseModel):
    passed: bool
    reports: List[ReportOut]


class LinearModelRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    plant: Optional[Dict[str, Any]] = None


class LinearModelResponse(BaseModel):
    A: List[List[float]]
    B: List[List[float]]
    E: List[List[float]]
    A0: List[List[float]]
    B0: List[List[float]]


class GainRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    plant: Optional[Dict[str, Any]] = None
    weights: Optional[Dict[str, Any]] = None


class GainResponse(BaseModel):
    K: List[float]
    P: List[List[float]]
    closed_loop_eigs: List[Tuple[float, float]]
    residual_norm: float


class TensionsRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tau_ref: List[float]
    muscle: Optional[Dict[str, Any]] = None


class TensionsResponse(BaseModel):
    T_ref: List[float]
    objective: float
    active_set: List[int]
    equality_residual: float


def _report_out(result: RunResult) -> ReportOut:
    rep = result.report
    return ReportOut(
        scenario=rep.scenario,
        passed=rep.passed,
        envelopes=[EnvelopeOut(**r.to_dict()) for r in rep.results],
    )


def _resolve_plant(doc: Optional[Dict[str, Any]]) -> PlantParams:
    if doc is None:
        return PlantParams()
    return configio._build(PlantParams, doc, "plant")


def create_app() -> FastAPI:
    app = FastAPI(title="wipsim", version=__service_version__,
                  description="Two-wheel inverted pendulum simulation service")

    @app.exception_handler(ValueError)
    async def _value_error(_, exc: ValueError):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> Dict[str, str]:
        return {"status": "ok", "version": __service_version__}

    @app.get("/scenarios", response_model=List[ScenarioSummary])
    def list_scenarios():
        return [
            ScenarioSummary(name=s.name, duration=s.duration,
                            description=s.description, envelopes=len(s.envelopes))
            for s in builtin_scenarios()
        ]

    @app.get("/scenarios/{name}")
    def get_scenario(name: str) -> Dict[str, Any]:
        try:
            spec = scenario_by_name(name)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no scenario named {name!r}")
        return configio.scenario_to_dict(spec)

    def _execute(req: RunRequest) -> RunResponse:
        if isinstance(req.scenario, str):
            try:
                spec = scenario_by_name(req.scenario)
            except KeyError:
                raise HTTPException(status_code=404,
                                    detail=f"no scenario named {req.scenario!r}")
        else:
            spec = configio.scenario_from_dict(req.scenario)
        cfg = configio.config_from_dict(req.config) if req.config is not None else SimConfig()
        if req.overrides:
            from .runner import apply_overrides
            cfg = apply_overrides(cfg, req.overrides)
        try:
            result = run_scenario(spec, cfg, seed=req.seed)
        except (NotStabilizableError, CareDivergenceError, QpInfeasibleError,
                SingularPlantError) as err:
            raise HTTPException(status_code=422, detail=str(err))
        except IntegrationBlowUpError as err:
            raise HTTPException(status_code=422, detail=str(err))
        trace = None
        if req.include_trace:
            tr = result.trace
            if req.channels:
                try:
                    idx = [tr.columns.index(c) for c in dict.fromkeys(["t"] + req.channels)]
                except ValueError:
                    bad = [c for c in req.channels if c not in tr.columns]
                    raise HTTPException(status_code=422,
                                        detail=f"unknown trace columns {bad}")
                trace = TraceOut(columns=[tr.columns[i] for i in idx],
                                 rows=tr.data[:, idx].tolist())
            else:
                trace = TraceOut(columns=list(tr.columns), rows=tr.data.tolist())
        return RunResponse(
            scenario=spec.name,
            passed=result.report.passed,
            report=_report_out(result),
            events_applied=result.events_applied,
            trace=trace,
        )

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        return _execute(req)

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest) -> CheckResponse:
        reports = []
        ok = True
        for spec in builtin_scenarios():
            result = run_scenario(spec, SimConfig(), seed=req.seed)
            reports.append(_report_out(result))
            ok = ok and result.report.passed
        return CheckResponse(passed=ok, reports=reports)

    @app.post("/plant/linear-model", response_model=LinearModelResponse)
    def linear_model(req: LinearModelRequest) -> LinearModelResponse:
        p = _resolve_plant(req.plant)
        try:
            m = build_linear_model(p)
        except SingularPlantError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return LinearModelResponse(A=m.A.tolist(), B=m.B.tolist(), E=m.E.tolist(),
                                   A0=m.A0.tolist(), B0=m.B0.tolist())

    @app.post("/lqr/gain", response_model=GainResponse)
    def lqr_gain(req: GainRequest) -> GainResponse:
        p = _resolve_plant(req.plant)
        w = configio._build(LqrWeights, req.weights, "weights") if req.weights else LqrWeights()
        try:
            gain = solve_care(build_linear_model(p), w)
        except (NotStabilizableError, CareDivergenceError, SingularPlantError) as err:
            raise HTTPException(status_code=422, detail=str(err))
        eigs = [(float(e.real), float(e.imag)) for e in gain.closed_loop_eigs]
        return GainResponse(K=gain.K.ravel().tolist(), P=gain.P.tolist(),
                            closed_loop_eigs=eigs, residual_norm=gain.residual_norm)

    @app.post("/muscle/tensions", response_model=TensionsResponse)
    def tensions(req: TensionsRequest) -> TensionsResponse:
        cfg = (configio.muscle_config_from_dict(req.muscle)
               if req.muscle is not None else default_muscle_config())
        try:
            sol = allocate_tensions(cfg, req.tau_ref)
        except QpInfeasibleError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return TensionsResponse(T_ref=sol.T_ref.tolist(), objective=sol.objective,
                                active_set=list(sol.active_set),
                                equality_residual=sol.equality_residual)

    return app


app = create_app()
