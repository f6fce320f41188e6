from abc import ABC, abstractmethod

from catalog.filtering import filterCatalog
from models.sceneRecord import Catalog, FilterSpec


class SceneSource(ABC):
    @abstractmethod
    def loadCatalog(self, spec: FilterSpec) -> Catalog:
        pass

    @abstractmethod
    def getSourceName(self) -> str:
        pass


# Separate function to pull a filtered catalog from any source
def anySource(source: SceneSource, spec: FilterSpec) -> Catalog:
    catalog = source.loadCatalog(spec)
    return filterCatalog(catalog, spec)
