"""Registry entity model: the five-group hierarchy and its containment rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Group(Enum):
    CLUSTER = "cluster"
    FEDERATION = "federation"
    LAYOUT = "layout"
    JOBS = "jobs"
    SECURITY = "security"


class EntityType(Enum):
    CLUSTER = "Cluster"
    MACHINE_ROLE = "MachineRole"
    MACHINE = "Machine"
    DISK_VOLUME = "DiskVolume"
    DOMAIN = "Domain"
    FEDERATION = "Federation"
    DATABASE_DEFINITION = "DatabaseDefinition"
    DATABASE_VERSION = "DatabaseVersion"
    DATABASE_INSTANCE = "DatabaseInstance"
    REMOTE_DATABASE_CONNECTION = "RemoteDatabaseConnection"
    QUEUE = "Queue"
    JOB_DEFINITION = "JobDefinition"
    JOB_INSTANCE = "JobInstance"
    USER = "User"
    USER_GROUP = "UserGroup"


GROUP_OF = {
    EntityType.CLUSTER: Group.CLUSTER,
    EntityType.MACHINE_ROLE: Group.CLUSTER,
    EntityType.MACHINE: Group.CLUSTER,
    EntityType.DISK_VOLUME: Group.CLUSTER,
    EntityType.DOMAIN: Group.FEDERATION,
    EntityType.FEDERATION: Group.FEDERATION,
    EntityType.DATABASE_DEFINITION: Group.FEDERATION,
    EntityType.DATABASE_VERSION: Group.FEDERATION,
    EntityType.REMOTE_DATABASE_CONNECTION: Group.FEDERATION,
    EntityType.DATABASE_INSTANCE: Group.LAYOUT,
    EntityType.QUEUE: Group.JOBS,
    EntityType.JOB_DEFINITION: Group.JOBS,
    EntityType.JOB_INSTANCE: Group.JOBS,
    EntityType.USER: Group.SECURITY,
    EntityType.USER_GROUP: Group.SECURITY,
}

# child type -> allowed parent types; Cluster is the only root.
CONTAINMENT: dict[EntityType, tuple[EntityType, ...]] = {
    EntityType.CLUSTER: (),
    EntityType.MACHINE_ROLE: (EntityType.CLUSTER,),
    EntityType.MACHINE: (EntityType.MACHINE_ROLE,),
    EntityType.DISK_VOLUME: (EntityType.MACHINE,),
    EntityType.DOMAIN: (EntityType.CLUSTER,),
    EntityType.FEDERATION: (EntityType.DOMAIN,),
    EntityType.DATABASE_DEFINITION: (EntityType.FEDERATION,),
    EntityType.REMOTE_DATABASE_CONNECTION: (EntityType.FEDERATION,),
    EntityType.DATABASE_VERSION: (EntityType.DATABASE_DEFINITION,),
    EntityType.DATABASE_INSTANCE: (EntityType.DATABASE_VERSION,),
    EntityType.QUEUE: (EntityType.CLUSTER, EntityType.DOMAIN, EntityType.FEDERATION),
    EntityType.JOB_DEFINITION: (EntityType.CLUSTER, EntityType.DOMAIN,
                                EntityType.FEDERATION),
    EntityType.JOB_INSTANCE: (EntityType.QUEUE,),
    EntityType.USER: (EntityType.DOMAIN,),
    EntityType.USER_GROUP: (EntityType.DOMAIN,),
}

# Disk volumes carry usage flags; database definitions may be mirrored or
# (registry-only, no execution support) sharded.
DISK_VOLUME_FLAGS = ("system", "log", "temp", "data")
LAYOUT_KINDS = ("single", "mirrored", "sharded")

DEFAULT_MACHINE_ROLES = ("controller", "node")


@dataclass
class Entity:
    id: str
    type: EntityType
    name: str
    parent: Optional[str]  # parent entity id; None only for the root Cluster
    properties: dict[str, str] = field(default_factory=dict)
    version: int = 1
    created: str = ""
    modified: str = ""

    @property
    def group(self) -> Group:
        return GROUP_OF[self.type]

    def prop(self, key: str, default: str = "") -> str:
        return self.properties.get(key, default)
