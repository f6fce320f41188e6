from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GeoTransform(BaseModel):
    model_config = ConfigDict(frozen = True)

    originX: float = Field(..., description = "Map x of the upper-left corner")
    originY: float = Field(..., description = "Map y of the upper-left corner")
    pixelWidth: float = Field(..., gt = 0, description = "Map units per column")
    pixelHeight: float = Field(..., gt = 0, description = "Map units per row, applied downward")
    crsCode: int = Field(..., description = "EPSG code")

    def toMap(self, col: float, row: float) -> Tuple[float, float]:
        return (self.originX + col * self.pixelWidth, self.originY - row * self.pixelHeight)

    def toPixel(self, x: float, y: float) -> Tuple[float, float]:
        return ((x - self.originX) / self.pixelWidth, (self.originY - y) / self.pixelHeight)

    def shifted(self, cols: int, rows: int) -> "GeoTransform":
        originX, originY = self.toMap(cols, rows)
        return self.model_copy(update = {"originX": originX, "originY": originY})

    def toDict(self):
        return self.model_dump()


class RegionOfInterest(BaseModel):
    model_config = ConfigDict(frozen = True)

    minX: float
    minY: float
    maxX: float
    maxY: float
    crsCode: int = Field(..., description = "EPSG code")

    @model_validator(mode = "after")
    def _checkBounds(self):
        if not self.minX < self.maxX:
            raise ValueError("minX must be less than maxX")
        if not self.minY < self.maxY:
            raise ValueError("minY must be less than maxY")
        return self

    def intersects(self, other: "RegionOfInterest") -> bool:
        return (self.minX <= other.maxX and other.minX <= self.maxX
                and self.minY <= other.maxY and other.minY <= self.maxY)

    def grown(self, margin: float) -> "RegionOfInterest":
        return self.model_copy(update = {
            "minX": self.minX - margin, "minY": self.minY - margin,
            "maxX": self.maxX + margin, "maxY": self.maxY + margin,
        })

    @classmethod
    def parse(cls, text: str) -> "RegionOfInterest":
        """Parse 'minx,miny,maxx,maxy,epsg'."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 5:
            raise ValueError("expected minx,miny,maxx,maxy,epsg")

        return cls(minX = float(parts[0]), minY = float(parts[1]),
                   maxX = float(parts[2]), maxY = float(parts[3]), crsCode = int(parts[4]))

    def toDict(self):
        return self.model_dump()
