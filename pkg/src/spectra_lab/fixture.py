"""Desk-scale television workload with an injected CPU-load fault.

Three dispatch threads and twelve handlers. The scenario runs 60 s of TV mode,
15 s of teletext, 15 s of transparent teletext and 60 s of TV mode again. The
injected fault keeps re-posting the teletext page poll after teletext has been
left, which raises TV-mode load by about ten points. A benign cache sweep
also only runs after teletext, so comparing TV-mode windows before and after
teletext yields two suspects, one of them the real fault.

Handler costs are set with the VM cost model (1 ms per statement): a handler
``work(n); return 0;`` costs ``2n + 5`` ms.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Tuple

from .scenario import FaultInjection, Scenario, Stimulus, ThreadSpec

THREADS = [ThreadSpec(0, 1), ThreadSpec(1, 2), ThreadSpec(2, 3)]

# registration order == dispatch-entry probe id
HANDLERS: List[Tuple[str, int]] = [
    ("boot_init", 0),
    ("rc_key", 2),
    ("vol_up", 0),
    ("chan_up", 0),
    ("osd_clock", 0),
    ("vid_status_poll", 1),
    ("audio_level", 1),
    ("tuner_afc", 2),
    ("txt_decode", 1),
    ("txt_render", 0),
    ("txt_page_poll", 0),
    ("txt_cache_sweep", 0),
]

PHASES = [("tv1", 60_000), ("teletext", 15_000), ("transparent", 15_000), ("tv2", 60_000)]

FAULT_HANDLER = "txt_page_poll"
BENIGN_HANDLER = "txt_cache_sweep"
TRUTH = frozenset({FAULT_HANDLER})

STARTUP_SECONDS = 10
PASS_EPOCHS = range(10, 20)     # ten spectra from the first TV phase
FAIL_EPOCHS = range(100, 110)   # ten spectra from the second TV phase
TV1_WINDOW = (10, 59)           # load plateau, start-up excluded
TV2_WINDOW = (90, 149)

_PROGRAM = """\
// Television control software, message handlers.
// Each handler runs on one dispatch thread; work(n) burns 2n+3 ms.

int work(int n) {
    int i = 0;
    while (i < n) {
        i = i + 1;
    }
    return i;
}

int boot_init() {
    work(200);
    return 0;
}

int rc_key(int code) {
    work(3);
    return code;
}

int vol_up(int level) {
    work(5);
    if (level < 100) {
        level = level + 1;
    }
    return level;
}

int chan_up(int chan) {
    work(6);
    return chan + 1;
}

int osd_clock() {
    work(10);
    return 0;
}

int vid_status_poll() {
    work(4);
    return 0;
}

int audio_level() {
    work(3);
    return 0;
}

int tuner_afc() {
    work(5);
    return 0;
}

int txt_decode() {
    work(8);
    return 0;
}

int txt_render(int transparent) {
    if (transparent) {
        work(12);
    } else {
        work(20);
    }
    return 0;
}

int txt_page_poll() {
    work(2);
    return 0;
}

int txt_cache_sweep() {
    work(2);
    post_message(@SWEEP_ID@, 1000);
    return 0;
}
"""


def program_source() -> str:
    sweep_id = [n for n, _ in HANDLERS].index(BENIGN_HANDLER)
    return _PROGRAM.replace("@SWEEP_ID@", str(sweep_id))


def _periodic(handler: str, thread: int, start: int, stop: int, period: int,
              offset: int, args: Tuple[int, ...] = ()) -> List[Stimulus]:
    return [Stimulus(t, thread, handler, args) for t in range(start + offset, stop, period)]


def case_study_scenario(seed: int = 0, fault: bool = True, jitter_ms: int = 10,
                        capacity: int = 8, bytes_per_second: int = 960) -> Scenario:
    threads: Dict[str, int] = dict(HANDLERS)
    end = sum(d for _, d in PHASES)
    txt_start, txt_end = 60_000, 90_000
    mix_start = 75_000

    stimuli: List[Stimulus] = []
    stimuli += [Stimulus(t, 0, "boot_init") for t in range(0, STARTUP_SECONDS * 1000, 1000)]
    stimuli += _periodic("vid_status_poll", 1, 0, end, 100, 5)
    stimuli += _periodic("audio_level", 1, 0, end, 200, 30)
    stimuli += _periodic("tuner_afc", 2, 0, end, 500, 50)
    stimuli += _periodic("osd_clock", 0, 0, end, 1000, 400)
    stimuli += _periodic("txt_decode", 1, txt_start, txt_end, 100, 20)
    stimuli += _periodic("txt_render", 0, txt_start, mix_start, 200, 60, (0,))
    stimuli += _periodic("txt_render", 0, mix_start, txt_end, 200, 60, (1,))
    stimuli += _periodic("txt_page_poll", 0, txt_start, txt_end, 100, 70)
    # remote-control keys: (time, handler, arg); rc_key decodes every press
    keys = [
        (5_000, None, 0),
        (15_000, "vol_up", 20),
        (40_000, "chan_up", 3),
        (60_000, None, 1),        # teletext on
        (75_000, None, 2),        # transparent teletext
        (90_000, "txt_cache_sweep", 3),  # back to TV; teletext cleanup starts
        (105_000, "vol_up", 21),
        (130_000, "chan_up", 4),
    ]
    for t, handler, arg in keys:
        stimuli.append(Stimulus(t, threads["rc_key"], "rc_key", (arg,)))
        if handler == "txt_cache_sweep":
            stimuli.append(Stimulus(t + 20, threads[handler], handler))
        elif handler is not None:
            stimuli.append(Stimulus(t + 20, threads[handler], handler, (arg,)))
    stimuli.sort(key=lambda s: s.time)

    faults = []
    if fault:
        faults.append(FaultInjection("lingering-repost", FAULT_HANDLER, 100, "tv2"))
    header = {
        "seed": str(seed),
        "n_funcs": str(len(HANDLERS)),
        "scope": "dispatch",
        "capacity": str(capacity),
        "bytes_per_second": str(bytes_per_second),
        "jitter_ms": str(jitter_ms),
    }
    return Scenario(header, list(THREADS), list(HANDLERS), list(PHASES), faults, stimuli)


def expected_load_points() -> Dict[str, float]:
    """Arithmetic estimate of plateau loads in percentage points.

    Sums rate x cost over the periodic handlers; independent of the simulator.
    """
    cost = lambda n: 2 * n + 5  # noqa: E731
    tv = (10 * cost(4) + 5 * cost(3) + 2 * cost(5) + 1 * cost(10)) / 10
    fault = 10 * cost(2) / 10
    sweep = (cost(2) + 1) / 10  # one post_message statement more
    return {"tv1": tv, "tv2": tv + fault + sweep, "delta": fault + sweep}


def write_fixture(directory: Path, seed: int = 0, fault: bool = True) -> Dict[str, Path]:
    """Write program, scenario and truth files for the CLI."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "program": directory / "tv.mc",
        "scenario": directory / "case_study.scn",
        "truth": directory / "truth.txt",
    }
    paths["program"].write_text(program_source(), encoding="utf-8")
    paths["scenario"].write_text(case_study_scenario(seed, fault).to_text(), encoding="utf-8")
    paths["truth"].write_text("".join(f"{n}\n" for n in sorted(TRUTH)), encoding="utf-8")
    return paths

