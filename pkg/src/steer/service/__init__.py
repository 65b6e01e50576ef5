"""HTTP layer: pydantic request/response schemas and the FastAPI app."""
