# Command-line and Streamlit entry points.
