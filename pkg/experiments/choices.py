from django.db import models
from django.utils.translation import gettext_lazy as _


class SchemeSelection(models.TextChoices):
    TIMECHANGE = 'timechange', _('Time change')
    EM = 'em', _('Euler-Maruyama')
    BOTH = 'both', _('Both, coupled')


class CheckName(models.TextChoices):
    QV = 'qv', _('Quadratic variation equals the inverse clock')
    ORIGIN = 'origin', _('Origin avoidance')
    GRONWALL = 'gronwall', _('Gronwall bound on coupled pairs')
    SMALL_TIME = 'small-time', _('Small-time slope')
    KS_ALPHA0 = 'ks-alpha0', _('Gaussian marginal at alpha = 0')
    ROUNDTRIP = 'roundtrip', _('Transform round trip')
    DRIVER_COV = 'driver-cov', _('Driver covariance')
    ODE = 'ode', _('ODE consistency')
    MEAN_VALUE = 'mean-value', _('Mean-value inequality')
    STRONG_CONVERGENCE = 'strong-convergence', _('Strong self-convergence')


class CheckStatus(models.TextChoices):
    PASS = 'pass', _('Pass')
    FAIL = 'fail', _('Fail')
    INCONCLUSIVE = 'inconclusive', _('Inconclusive')
