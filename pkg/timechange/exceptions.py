from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


class HorizonExceededError(ValidationError):
    """The simulated clock does not reach the requested time."""

    default_message = _("The clock does not reach t = %(t)s within the simulated horizon.")

    def __init__(self, message=None, params=None):
        super().__init__(message or self.default_message, code='horizon_exceeded', params=params)
