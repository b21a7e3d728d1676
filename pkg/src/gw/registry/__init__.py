"""Transactional cluster registry: entities, XML serialization, discovery."""

from .discovery import (
    Addition,
    ChangeSet,
    DiscoveryError,
    Update,
    apply_changes,
    discover,
)
from .model import (
    CONTAINMENT,
    DEFAULT_MACHINE_ROLES,
    DISK_VOLUME_FLAGS,
    GROUP_OF,
    Entity,
    EntityType,
    Group,
)
from .provision import ProvisionError, data_volumes, instantiate_database
from .store import (
    ContainmentViolationError,
    DuplicateNameError,
    HasChildrenError,
    MissingParentError,
    RegistryError,
    RegistryStore,
    UnknownEntityError,
    VersionConflictError,
    create_many,
)
from .xmlio import export_xml, import_xml

__all__ = [
    "Addition", "ChangeSet", "DiscoveryError", "Update", "apply_changes", "discover",
    "CONTAINMENT", "DEFAULT_MACHINE_ROLES", "DISK_VOLUME_FLAGS", "GROUP_OF",
    "Entity", "EntityType", "Group",
    "ProvisionError", "data_volumes", "instantiate_database",
    "ContainmentViolationError", "DuplicateNameError", "HasChildrenError",
    "MissingParentError", "RegistryError", "RegistryStore", "UnknownEntityError",
    "VersionConflictError", "create_many",
    "export_xml", "import_xml",
]
