import os

import pandas as pd
import streamlit as st
import toml
from dotenv import load_dotenv

# Import core functionalities
from app.ui_components import display_section_header, drift_chart, interface_chart, show_termination
from core.artifacts import list_runs, load_bottom, load_metadata, load_snapshot, load_timeseries, snapshot_paths
from core.config import env_output_dir

# Load environment variables from .env file
load_dotenv()

# --- Streamlit UI Configuration ---
st.set_page_config(
    page_title="Wavesheet run browser",
    page_icon="🌊",
    layout="wide",
    initial_sidebar_state="expanded"
)

# --- Sidebar: where the runs live ---
with st.sidebar:
    st.title("⚙️ Runs")
    st.markdown("---")
    root = st.text_input("Output directory", value=env_output_dir())
    runs = list_runs(root)
    if not runs:
        st.warning(f"No run directories under `{root}`. Start one with `python -m app.cli run`.", icon="⚠️")
    selected = st.selectbox("Run", runs, format_func=os.path.basename) if runs else None
    st.markdown("---")
    st.info("This browser only reads saved files; it never starts a simulation.")

# --- Main Content Area ---
st.title("🌊 Wavesheet run browser")

if selected is not None:
    metadata = load_metadata(selected)
    show_termination(metadata)

    display_section_header("Conservation", "📈")
    try:
        timeseries = load_timeseries(selected)
    except FileNotFoundError as e:
        st.error(str(e))
        timeseries = pd.DataFrame()
    if not timeseries.empty:
        drift = metadata.get("drift", {})
        col1, col2, col3 = st.columns(3)
        col1.metric("Mass drift", f"{float(drift.get('mass', float('nan'))):.2e}")
        col2.metric("Energy drift", f"{float(drift.get('energy', float('nan'))):.2e}")
        col3.metric("Steps", len(timeseries) - 1)
        st.altair_chart(drift_chart(timeseries), use_container_width=True)
        with st.expander("Time series"):
            st.dataframe(timeseries)

    display_section_header("Interface", "〰️")
    paths = snapshot_paths(selected)
    if paths:
        index = st.slider("Snapshot", 0, len(paths) - 1, len(paths) - 1) if len(paths) > 1 else 0
        snap = load_snapshot(paths[index])
        st.caption(f"t = {snap.time:.6g}, N = {snap.points.size}, {snap.mode} formulation")
        st.altair_chart(interface_chart(snap.points, load_bottom(selected)), use_container_width=True)
    else:
        st.info("No snapshots saved for this run.")

    display_section_header("Configuration", "🧾")
    if metadata.get("config"):
        st.code(toml.dumps(metadata["config"]), language="toml")
        st.json(metadata.get("versions", {}))
