from django.db import models
from django.utils.translation import gettext_lazy as _


class Scheme(models.TextChoices):
    TIMECHANGE = 'timechange', _('Time change')
    EM = 'em', _('Euler-Maruyama')


class Interpolation(models.TextChoices):
    LINEAR = 'linear', _('Linear between s-grid nodes')
    BRIDGE = 'bridge', _('Brownian bridge at inverted times')
