"""FastAPI service wrapping the simulator; the CLI is a thin client of it.

Import `semm.service.app.create_app` to build the application; schemas and
handlers are importable submodules (kept lazy here to avoid import cycles
with the config layer).
"""
