from django.db import models


class RunRecord(models.Model):
    """Log of every command run and the artifacts it produced"""
    STATUS_CHOICES = [
        ('passed', 'Passed'),
        ('failed', 'Failed'),
        ('error', 'Error'),
    ]

    command = models.CharField(max_length=20)
    config = models.JSONField(default=dict)
    content_hash = models.CharField(max_length=64, blank=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='passed')
    exit_code = models.IntegerField(default=0)
    summary = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)

    notes = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"Run: {self.command} - {self.status}"
