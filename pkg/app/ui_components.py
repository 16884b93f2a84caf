import altair as alt
import numpy as np
import pandas as pd
import streamlit as st

# Reusable widgets of the run browser in app/main.py.


def display_section_header(title, icon=None):
    """Displays a consistent section header."""
    if icon:
        st.subheader(f"{icon} {title}")
    else:
        st.subheader(title)
    st.markdown("---")


def drift_frame(timeseries: pd.DataFrame) -> pd.DataFrame:
    """Long-format relative drift of mass and energy against their first values."""
    out = []
    for column in ("mass", "energy"):
        values = timeseries[column].to_numpy(dtype=float)
        scale = abs(values[0]) if values.size and values[0] != 0.0 else 1.0
        out.append(pd.DataFrame({"time": timeseries["time"], "quantity": column,
                                 "relative drift": (values - values[0]) / scale}))
    return pd.concat(out, ignore_index=True)


def drift_chart(timeseries: pd.DataFrame) -> alt.Chart:
    return alt.Chart(drift_frame(timeseries)).mark_line().encode(
        x=alt.X("time:Q", title="t"),
        y=alt.Y("relative drift:Q", axis=alt.Axis(format=".1e")),
        color="quantity:N",
        tooltip=["time", "quantity", "relative drift"],
    ).properties(height=280)


def interface_frame(points: np.ndarray, bottom: np.ndarray | None = None) -> pd.DataFrame:
    """Node coordinates of the surface and the bottom, each in drawing order."""
    frames = [pd.DataFrame({"x": points.real, "y": points.imag, "curve": "surface",
                            "order": np.arange(points.size)})]
    if bottom is not None:
        frames.append(pd.DataFrame({"x": bottom.real, "y": bottom.imag, "curve": "bottom",
                                    "order": np.arange(bottom.size)}))
    return pd.concat(frames, ignore_index=True)


def interface_chart(points: np.ndarray, bottom: np.ndarray | None = None) -> alt.Chart:
    return alt.Chart(interface_frame(points, bottom)).mark_line().encode(
        x=alt.X("x:Q", scale=alt.Scale(zero=False)),
        y=alt.Y("y:Q", scale=alt.Scale(zero=False)),
        color="curve:N",
        order="order:Q",
    ).properties(height=320)


def show_termination(metadata: dict):
    """Colored banner with how the run ended."""
    run = metadata.get("run", {})
    reason = run.get("termination")
    if reason is None:
        st.info("This run has no metadata yet (still running, or interrupted).")
    elif reason == "completed":
        st.success(f"Completed at t = {run.get('final_time')} after {run.get('steps')} steps.")
    elif reason == "error":
        st.error(f"Stopped by an error at t = {run.get('final_time')}: {run.get('message')}")
    else:
        st.warning(f"Stopped ({reason}) at t = {run.get('final_time')}: {run.get('message')}")
