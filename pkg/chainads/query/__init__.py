from chainads.query.processor import QueryOptions, QueryProcessor, query_intra, query_single, query_window
from chainads.query.vo import VerificationObject
