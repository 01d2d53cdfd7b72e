class ChainAdsError(Exception):
    """
    Base class of every error raised by the package.
    Each module declares its own concrete errors next to the code raising them.
    """
    pass
