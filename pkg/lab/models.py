from django.db import models


class Experiment(models.Model):
    """
    One invocation of train or compare
    """
    name = models.CharField(max_length=100)
    methods = models.JSONField(default=list)
    config = models.JSONField(default=dict)
    output_dir = models.CharField(max_length=500)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', '-id']

    def __str__(self):
        return f"{self.name} ({', '.join(self.methods)})"


class Run(models.Model):
    """
    One seed of one method inside an experiment
    """
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('aborted', 'Aborted'),
    ]

    experiment = models.ForeignKey(Experiment, on_delete=models.CASCADE, related_name='runs')
    method = models.CharField(max_length=50)
    seed = models.IntegerField()
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    metrics_path = models.CharField(max_length=500)
    steps_completed = models.IntegerField(default=0)
    final_train_loss = models.FloatField(blank=True, null=True)
    peak_test_accuracy = models.FloatField(blank=True, null=True)
    mean_suppression = models.FloatField(blank=True, null=True)
    diagnostic = models.TextField(blank=True, default='')
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(blank=True, null=True)

    class Meta:
        unique_together = ['experiment', 'method', 'seed']
        ordering = ['experiment', 'method', 'seed']

    def __str__(self):
        return f"{self.experiment.name} - {self.method} - seed {self.seed} ({self.status})"
