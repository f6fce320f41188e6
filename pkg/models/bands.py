from typing import Dict, Iterable, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class BandDescriptor(BaseModel):
    model_config = ConfigDict(frozen = True)

    name: str = Field(..., description = "Band label, e.g. B2")
    role: str = Field(..., description = "Spectral role, e.g. Blue")
    wavelengthNm: Optional[float] = Field(None, description = "Central wavelength (S2A), nanometres")
    nativeResolutionM: Optional[float] = Field(None, description = "Native pixel size, metres")

    def toDict(self):
        return self.model_dump()


# Sentinel-2 MSI bands, central wavelengths of S2A
S2_BANDS: Dict[str, BandDescriptor] = {
    b.name: b for b in [
        BandDescriptor(name = "B1", role = "Aerosols", wavelengthNm = 443.9, nativeResolutionM = 60),
        BandDescriptor(name = "B2", role = "Blue", wavelengthNm = 496.6, nativeResolutionM = 10),
        BandDescriptor(name = "B3", role = "Green", wavelengthNm = 560.0, nativeResolutionM = 10),
        BandDescriptor(name = "B4", role = "Red", wavelengthNm = 664.5, nativeResolutionM = 10),
        BandDescriptor(name = "B5", role = "RedEdge1", wavelengthNm = 703.9, nativeResolutionM = 20),
        BandDescriptor(name = "B6", role = "RedEdge2", wavelengthNm = 740.2, nativeResolutionM = 20),
        BandDescriptor(name = "B7", role = "RedEdge3", wavelengthNm = 782.5, nativeResolutionM = 20),
        BandDescriptor(name = "B8", role = "NIR", wavelengthNm = 835.1, nativeResolutionM = 10),
        BandDescriptor(name = "B8A", role = "RedEdge4", wavelengthNm = 864.8, nativeResolutionM = 20),
        BandDescriptor(name = "B9", role = "WaterVapor", wavelengthNm = 945.0, nativeResolutionM = 60),
        BandDescriptor(name = "B10", role = "Cirrus", wavelengthNm = 1373.5, nativeResolutionM = 60),
        BandDescriptor(name = "B11", role = "SWIR1", wavelengthNm = 1613.7, nativeResolutionM = 20),
        BandDescriptor(name = "B12", role = "SWIR2", wavelengthNm = 2202.4, nativeResolutionM = 20),
    ]
}

S2_BAND_ORDER: List[str] = list(S2_BANDS.keys())

# Band set the six-band Tasselled Cap needs, in coefficient column order
TCT_BANDS = ("B2", "B3", "B4", "B8", "B11", "B12")

# Only the 10 m bands enter PCA by default
PCA_DEFAULT_BANDS = ("B2", "B3", "B4", "B8")


def describeBand(name: str) -> BandDescriptor:
    if name in S2_BANDS:
        return S2_BANDS[name]

    return BandDescriptor(name = name, role = "Derived")


def sortBandNames(names: Iterable[str]) -> List[str]:
    # Sentinel-2 bands first in sensor order, anything else after, alphabetically
    known = [n for n in S2_BAND_ORDER if n in set(names)]
    other = sorted(n for n in set(names) if n not in S2_BANDS)
    return known + other


def normalizeBandName(name: str) -> Optional[str]:
    """Map 'B02', 'b8a', 'B8A' etc. onto the catalog's canonical band labels."""
    candidate = name.strip().upper()
    if not candidate.startswith("B"):
        return None

    suffix = candidate[1:]
    if suffix == "8A":
        return "B8A"
    if suffix.isdigit():
        canonical = f"B{int(suffix)}"
        if canonical in S2_BANDS:
            return canonical

    return None
