import log


class Logger():
    def __init__(self, app_log=None):
        self.app_log = log.get_app_log(app_log)
