from django.db import models


class RunManifest(models.Model):
    digest = models.CharField(max_length=64, unique=True)
    command = models.CharField(max_length=64)
    seed_base = models.BigIntegerField(default=0)
    tool_version = models.CharField(max_length=32)
    output_paths = models.JSONField(default=list, blank=True)
    wall_clock = models.FloatField(default=0.0)
    runs = models.PositiveIntegerField(default=1)
    created_at = models.DateTimeField(auto_now_add=True)
    last_run_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-last_run_at']

    def __str__(self):
        return f"{self.command} [{self.digest[:12]}]"
