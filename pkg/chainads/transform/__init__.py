from chainads.transform.condition import CNFCondition, Domain, Query, parse_query, transform_object, transform_query
from chainads.transform.prefix import PrefixElement, range_cover, trans_value
