from fedfaas.dataplane.kvstore import KeyNotFound, KvClient, KvHandle, KvServer, StoreUnavailable
from fedfaas.dataplane.sharedfs import IoFailure, SharedFsAdapter
from fedfaas.dataplane.staging import StageFailure, TransferReference, stage_in, stage_out

__all__ = [
    "KeyNotFound",
    "KvClient",
    "KvHandle",
    "KvServer",
    "StoreUnavailable",
    "IoFailure",
    "SharedFsAdapter",
    "StageFailure",
    "TransferReference",
    "stage_in",
    "stage_out",
]
