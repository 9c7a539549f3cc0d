from django.apps import AppConfig


class TimechangeConfig(AppConfig):
    name = 'timechange'
    verbose_name = 'Time-change weak solution sampler'
