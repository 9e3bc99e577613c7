"""How much can execution times grow before the smart-home CPUs miss deadlines?

Sweeps the WCET margin upward and reports the first margin at which each
processor stops being schedulable.

    python3 demos/wcet_headroom.py
"""
from pathlib import Path

from iotforge import analyze_processor, parse_file

MODEL = Path(__file__).resolve().parent.parent / "fixtures" / "smarthome.iot"


def breaking_margin(model, processor, step=0.05, limit=4.0):
    margin = 1.0
    while margin <= limit:
        report = analyze_processor(model, processor, wcet_margin=margin)
        if report.verdict != "schedulable":
            return margin, report
        margin = round(margin + step, 2)
    return None, None


def main():
    model = parse_file(MODEL)
    for proc in model.hardware:
        margin, report = breaking_margin(model, proc.name)
        if margin is None:
            print(f"{proc.name}: schedulable up to the sweep limit")
            continue
        print(f"{proc.name}: first fails at margin {margin:.2f} ({report.verdict})")
        for r in report.results:
            status = "ok" if r.schedulable else "MISS"
            shown = "diverged" if r.diverged else f"{r.response_time} us"
            print(f"  {r.task.label:<20} C={r.task.wcet:>6} us  R={shown:>10}  {status}")


if __name__ == "__main__":
    main()
