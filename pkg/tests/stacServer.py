"""
Minimal STAC API used as an HTTP oracle: item search with datetime and cloud
filters, rel=next pagination, asset files, a truncated download and a failing
search route.
"""
import socket
import threading
import time
from datetime import datetime
from typing import Dict, List

import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response


def _parseTime(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def _matches(item: dict, body: dict) -> bool:
    interval = body.get("datetime")
    if interval:
        start, end = (_parseTime(t) for t in interval.split("/"))
        if not start <= _parseTime(item["properties"]["datetime"]) <= end:
            return False

    cloud = body.get("query", {}).get("eo:cloud_cover", {})
    if "lte" in cloud and item["properties"]["eo:cloud_cover"] > cloud["lte"]:
        return False
    return True


def createStacApp(items: List[dict], files: Dict[str, bytes]) -> FastAPI:
    app = FastAPI()
    app.state.searchRequests = []

    @app.post("/search")
    async def search(request: Request):
        body = await request.json()
        app.state.searchRequests.append(body)
        matched = [item for item in items if _matches(item, body)]

        limit = int(body.get("limit", 10))
        start = int(body.get("token", 0))
        page = matched[start:start + limit]

        links = []
        if start + limit < len(matched):
            links.append({"rel": "next", "href": "/search", "method": "POST",
                          "body": {"token": start + limit}, "merge": True})
        return {"type": "FeatureCollection", "features": page, "links": links}

    @app.post("/failing/search")
    async def failingSearch():
        return JSONResponse({"detail": "catalog backend unavailable"}, status_code = 500)

    @app.post("/garbage/search")
    async def garbageSearch():
        return Response(content = b"<html>not json</html>", media_type = "text/html")

    @app.get("/files/{name:path}")
    async def serveFile(name: str):
        if name not in files:
            raise HTTPException(status_code = 404, detail = "no such asset")
        return Response(content = files[name], media_type = "image/tiff")

    @app.get("/broken/{name:path}")
    async def brokenFile(name: str):
        # declares more bytes than it sends
        return Response(content = b"II*\x00partial", media_type = "image/tiff",
                        headers = {"Content-Length": "4096"})

    return app


def _freePort() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class StacServer:
    """Runs a FastAPI app under uvicorn in a background thread."""

    def __init__(self, app: FastAPI):
        self.app = app
        self.port = _freePort()
        config = uvicorn.Config(app, host = "127.0.0.1", port = self.port, log_level = "warning",
                                http = "h11", lifespan = "off")
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target = self._server.run, daemon = True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self):
        self._thread.start()
        deadline = time.time() + 10
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("mock STAC server did not start")
            time.sleep(0.02)

    def stop(self):
        self._server.should_exit = True
        self._thread.join(timeout = 10)
