# Generated by Django 5.2.9 on 2026-10-19 14:40

from django.db import migrations, models


class Migration(migrations.Migration):

    dependencies = [
        ('lab', '0001_initial'),
    ]

    operations = [
        migrations.AddField(
            model_name='run',
            name='mean_suppression',
            field=models.FloatField(blank=True, null=True),
        ),
    ]
