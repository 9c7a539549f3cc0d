from django.db import models
from django.utils.translation import gettext_lazy as _


class Verdict(models.TextChoices):
    HOLDS = 'holds', _('Holds')
    VIOLATED = 'violated', _('Violated')
    INCONCLUSIVE = 'inconclusive', _('Inconclusive')
