from chainads.crypto.accumulator import (
    Construction, PublicParams, AccValue, DisjointProof, keygen, create_accumulator,
    Acc1Accumulator, Acc2Accumulator
)
from chainads.crypto.multiset import Multiset
