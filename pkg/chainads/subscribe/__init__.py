from chainads.subscribe.ip_tree import CoverType, IPTree, build_ip_tree
from chainads.subscribe.processor import SubscriptionState, process_block_ip, process_block_lazy
from chainads.subscribe.service import SubscriptionService
