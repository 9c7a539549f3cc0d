from django.apps import AppConfig


class DriverConfig(AppConfig):
    name = 'driver'
    verbose_name = 'Brownian driver sampling'
