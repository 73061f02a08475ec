"""
FastAPI backend for tape analysis.
"""
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Optional

from fastapi import FastAPI, File, Query, Request, UploadFile, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from src import __version__
from src.cli import TapeAnalyzer
from src.config import Command, RunConfig, configure_logging, get_settings
from src.errors import NumericalError, TapeError
from src.ingest import TapeKind, TimestampFormat
from src.trade_model import Alignment
from src.utils import to_jsonable

logger = logging.getLogger(__name__)

SUPPORTED_SUFFIXES = {".csv", ".jsonl", ".json", ".txt"}

app = FastAPI(
    title="Tape Moments",
    description="Volume weighted price moments and price densities from trade tapes",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(TapeError)
async def tape_error_handler(request: Request, exc: TapeError):
    """Data errors are the client's (400); numerical failures are unprocessable (422)."""
    status = 422 if isinstance(exc, NumericalError) else 400
    return JSONResponse(status_code=status, content={"error": type(exc).__name__, "detail": str(exc)})


async def _analyze(command: Command, file: UploadFile, **flags: Any) -> Dict[str, Any]:
    if not file.filename:
        raise HTTPException(status_code=400, detail="No file provided")
    suffix = Path(file.filename).suffix.lower()
    if suffix not in SUPPORTED_SUFFIXES:
        raise HTTPException(
            status_code=400,
            detail=f"Unsupported file format: {suffix}. Upload a CSV or JSON-lines tape.",
        )

    settings = get_settings()
    tmp_path = None
    try:
        with tempfile.NamedTemporaryFile(delete=False, suffix=suffix) as tmp_file:
            tmp_file.write(await file.read())
            tmp_path = tmp_file.name
        config = RunConfig.build(command=command, input=tmp_path, workers=settings.workers, **flags)
        report = TapeAnalyzer(config).run()
    finally:
        if tmp_path is not None:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass

    report["config"]["input"] = file.filename
    return to_jsonable(report)


def _common(
    tape_format: TapeKind,
    timestamps: TimestampFormat,
    window: Optional[float],
    align: Alignment,
    nmax: Optional[int],
) -> Dict[str, Any]:
    return {
        "tape_format": tape_format,
        "timestamps": timestamps,
        "window_seconds": window,
        "align": align,
        "nmax": nmax if nmax is not None else get_settings().nmax,
    }


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "version": __version__}


@app.get("/config")
async def get_config():
    """Environment defaults used for requests that omit a parameter."""
    return get_settings().model_dump()


@app.post("/moments")
async def moments(
    file: UploadFile = File(...),
    tape_format: TapeKind = Query(TapeKind.CSV, alias="format"),
    timestamps: TimestampFormat = TimestampFormat.EPOCH_NANOS,
    window: Optional[float] = None,
    align: Alignment = Alignment.CENTERED,
    nmax: Optional[int] = None,
):
    """Per-window power sums and price moments of an uploaded tape."""
    return await _analyze(Command.MOMENTS, file, **_common(tape_format, timestamps, window, align, nmax))


@app.post("/density")
async def price_density(
    file: UploadFile = File(...),
    tape_format: TapeKind = Query(TapeKind.CSV, alias="format"),
    timestamps: TimestampFormat = TimestampFormat.EPOCH_NANOS,
    window: Optional[float] = None,
    align: Alignment = Alignment.CENTERED,
    nmax: Optional[int] = None,
    k: int = 2,
    grid_points: Optional[int] = None,
    grid_sigmas: Optional[float] = None,
):
    """Price density sampled on a grid around the VWAP of each window."""
    settings = get_settings()
    return await _analyze(
        Command.DENSITY,
        file,
        k=k,
        grid_points=grid_points if grid_points is not None else settings.grid_points,
        grid_sigmas=grid_sigmas if grid_sigmas is not None else settings.grid_sigmas,
        **_common(tape_format, timestamps, window, align, nmax),
    )


@app.post("/compare")
async def compare(
    file: UploadFile = File(...),
    tape_format: TapeKind = Query(TapeKind.CSV, alias="format"),
    timestamps: TimestampFormat = TimestampFormat.EPOCH_NANOS,
    window: Optional[float] = None,
    align: Alignment = Alignment.CENTERED,
):
    """Frequency mean against VWAP for every window."""
    return await _analyze(Command.COMPARE, file, **_common(tape_format, timestamps, window, align, None))


if __name__ == "__main__":
    import uvicorn

    settings = get_settings()
    configure_logging(settings.log_level)
    print(f"""
    Tape Moments API

    API URL:  http://localhost:{settings.api_port}
    API Docs: http://localhost:{settings.api_port}/docs

    Press Ctrl+C to stop the server.
    """)

    uvicorn.run(app, host=settings.api_host, port=settings.api_port)
