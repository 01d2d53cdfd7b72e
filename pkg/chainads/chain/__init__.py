from chainads.chain.block import Block, BlockHeader, build_block, build_genesis, validate_headers
from chainads.chain.objects import TemporalObject, read_objects
from chainads.chain.storage import ChainStore, load_headers
